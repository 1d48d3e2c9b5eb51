import numpy as np
import pytest

from crddme.fields import (
    ConstantPotential,
    Diffusivity,
    NodalPotential,
    PiecewiseRadialPotential,
    QuadraticPotential,
    TwoWellPotential,
    continuous_partition_function,
    discrete_gibbs_boltzmann,
    log_partition,
    values_at_nodes,
)
from crddme.mesh import dual_cells, generate_mesh, refine_uniform


class TestEval:
    def test_quadratic_value_and_gradient(self):
        pot = QuadraticPotential(1.0)
        assert pot.values([[0.3, -0.4]])[0] == pytest.approx(0.25)
        assert np.allclose(pot.gradients([[0.3, -0.4]])[0], [0.6, -0.8])

    def test_piecewise_radial_continuous_at_break(self):
        pot = PiecewiseRadialPotential(f0=1.0, break_radius=4.0)
        inner = pot.values([[4.0, 0.0]])[0]
        outer = pot.values([[4.0 + 1e-12, 0.0]])[0]
        assert inner == pytest.approx(4.0)
        assert outer == pytest.approx(4.0, abs=1e-10)
        # slope doubles outside
        g_in = pot.gradients([[3.0, 0.0]])[0]
        g_out = pot.gradients([[5.0, 0.0]])[0]
        assert g_in[0] == pytest.approx(1.0)
        assert g_out[0] == pytest.approx(2.0)

    def test_two_well_minima(self):
        pot = TwoWellPotential()
        assert pot.values([[1.0, 0.0], [-1.0, 0.0]]) == pytest.approx([0.0, 0.0])

    def test_nodal_rejects_pointwise_gradient(self):
        pot = NodalPotential(np.zeros(5))
        with pytest.raises(TypeError):
            pot.gradients([[0.0, 0.0]])

    def test_nodal_length_checked(self):
        m = generate_mesh("square", 1, size=1.0)
        with pytest.raises(ValueError):
            values_at_nodes(NodalPotential(np.zeros(3)), m)

    def test_diffusivity_positive(self):
        with pytest.raises(ValueError):
            Diffusivity(0.0)


class TestDiscreteGibbs:
    def setup_method(self):
        self.mesh = generate_mesh("square", 2, center=(0.0, 0.0), size=1.0)
        self.duals = dual_cells(self.mesh)

    def test_constant_potential_uniform_in_area(self):
        _, p = discrete_gibbs_boltzmann(self.mesh, self.duals, ConstantPotential(3.0))
        assert np.allclose(p, self.duals.volumes / self.duals.total_volume(), rtol=1e-13)

    def test_normalized(self):
        _, p = discrete_gibbs_boltzmann(self.mesh, self.duals, QuadraticPotential(30.0))
        assert abs(p.sum() - 1.0) < 1e-14

    def test_shift_invariance(self):
        phi = QuadraticPotential(1.0).values(self.mesh.nodes)
        _, p1 = discrete_gibbs_boltzmann(self.mesh, self.duals, NodalPotential(phi))
        _, p2 = discrete_gibbs_boltzmann(self.mesh, self.duals, NodalPotential(phi + 10.0))
        assert np.allclose(p1, p2, rtol=1e-13)

    def test_dihedral_symmetry(self):
        _, p = discrete_gibbs_boltzmann(self.mesh, self.duals, QuadraticPotential(1.0))
        nodes = self.mesh.nodes
        # reflect through x -> -x: probabilities must match at mirrored nodes
        key = {(round(x, 12), round(y, 12)): i for i, (x, y) in enumerate(nodes)}
        for i, (x, y) in enumerate(nodes):
            j = key[(round(-x, 12), round(y, 12))]
            assert p[i] == pytest.approx(p[j], rel=1e-13)

    def test_huge_potential_no_overflow(self):
        phi = np.linspace(500.0, 1200.0, self.mesh.n_nodes)
        _, p = discrete_gibbs_boltzmann(self.mesh, self.duals, NodalPotential(phi))
        assert np.isfinite(p).all()
        assert abs(p.sum() - 1.0) < 1e-12
        lz = log_partition(self.duals, phi)
        assert np.isfinite(lz)


class TestContinuousPartition:
    def test_constant_zero_unit_square(self):
        m = generate_mesh("square", 2, center=(0.5, 0.5), size=1.0)
        z = continuous_partition_function(m, ConstantPotential(0.0))
        assert z == pytest.approx(1.0, abs=1e-10)

    def test_shift_scales(self):
        m = generate_mesh("square", 2, center=(0.0, 0.0), size=1.0)
        z0 = continuous_partition_function(m, QuadraticPotential(1.0))
        pot_shifted = NodalPotential(np.zeros(1))  # placeholder, not used

        class Shifted:
            def values(self, pts):
                return QuadraticPotential(1.0).values(pts) + 2.0

        z1 = continuous_partition_function(m, Shifted())
        assert z1 == pytest.approx(z0 * np.exp(-2.0), rel=1e-12)

    def test_disk_refinement_second_order(self):
        # curved-boundary deficit dominates: successive differences shrink ~4x
        zs = []
        for k in (2, 3, 4, 5):
            m = generate_mesh("disk", k, center=(0.0, 0.0), size=1.0)
            zs.append(continuous_partition_function(m, QuadraticPotential(1.0)))
        d = np.abs(np.diff(zs))
        ratios = d[:-1] / d[1:]
        assert np.all(ratios > 3.0)
        assert np.all(ratios < 5.0)
        # dense-quadrature oracle on a much finer mesh
        m_fine = generate_mesh("disk", 7, center=(0.0, 0.0), size=1.0)
        z_ref = continuous_partition_function(m_fine, QuadraticPotential(1.0))
        assert abs(zs[-1] - z_ref) < 4 * abs(zs[-2] - z_ref)
