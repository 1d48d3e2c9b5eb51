import numpy as np
import pytest
from scipy.stats import chisquare

from crddme.bd import BDConfig, BDSpecies, bd_simulate, domain_partition_function
from crddme.fields import ConstantPotential, QuadraticPotential, discrete_gibbs_boltzmann
from crddme.mesh import TriangleLocator, dual_cells, generate_mesh
from crddme.reactions import DoiKernel


class TestDomainPartition:
    def test_square_flat(self):
        z = domain_partition_function(("square", (0.3, -0.2), 2.0), ConstantPotential(0.0))
        assert z == pytest.approx(4.0, rel=1e-12)

    def test_disk_flat(self):
        z = domain_partition_function(("disk", (0.0, 0.0), 0.5), ConstantPotential(0.0))
        assert z == pytest.approx(np.pi * 0.25, rel=1e-12)

    def test_disk_gaussian(self):
        # e^{-(x^2+y^2)} over a disk of radius R about the origin
        z = domain_partition_function(("disk", (0.0, 0.0), 1.0), QuadraticPotential(1.0))
        assert z == pytest.approx(np.pi * (1 - np.exp(-1.0)), rel=1e-10)


class TestFreeDiffusion:
    def test_msd_matches_planar_law(self):
        d = 0.5
        t_end = 0.01
        config = BDConfig(
            domain=("square", (0.0, 0.0), 10.0),
            species=[BDSpecies("A", d, ConstantPotential(0.0), init_count=1, region=(3, 0.0))],
            dt=1e-4,
        )
        grid = np.linspace(0.0, t_end, 6)
        out = bd_simulate(config, t_end, 10000, 99, t_grid=grid, track_first_particle=True)
        track = out["track"]
        msd = ((track - track[:, :1, :]) ** 2).sum(axis=2).mean(axis=0)
        for g in range(1, len(grid)):
            assert msd[g] == pytest.approx(4 * d * grid[g], rel=0.02)

    def test_positions_stay_inside_disk(self):
        config = BDConfig(
            domain=("disk", (0.05, 0.05), 0.1),
            species=[BDSpecies("A", 10.0, QuadraticPotential(1.0), init_count=3)],
            dt=1e-6,
        )
        out = bd_simulate(config, 2e-4, 200, 7)
        pos = out["final_positions"][:, 0]
        n = out["final_counts"][:, 0]
        for r in range(200):
            p = pos[r, : n[r]]
            assert np.all(np.hypot(p[:, 0] - 0.05, p[:, 1] - 0.05) <= 0.1 + 1e-12)

    def test_determinism(self):
        config = BDConfig(
            domain=("square", (0.0, 0.0), 1.0),
            species=[BDSpecies("A", 1.0, ConstantPotential(0.0), init_count=2)],
            dt=1e-4,
        )
        a = bd_simulate(config, 0.01, 50, 11)
        b = bd_simulate(config, 0.01, 50, 11)
        assert np.array_equal(a["final_positions"], b["final_positions"])
        c = bd_simulate(config, 0.01, 50, 12)
        assert not np.array_equal(a["final_positions"], c["final_positions"])


class TestBoltzmannStationarity:
    def test_histogram_matches_gibbs_weights(self):
        # long run in a quadratic well on a square (the mesh covers the
        # domain exactly, so dual-cell binning is lossless)
        mesh = generate_mesh("square", 1, center=(0.0, 0.0), size=0.1)
        duals = dual_cells(mesh)
        pot = QuadraticPotential(100.0)
        config = BDConfig(
            domain=("square", (0.0, 0.0), 0.1),
            species=[BDSpecies("A", 10.0, pot, init_count=1)],
            dt=2e-7,
        )
        n = 20000
        out = bd_simulate(config, 2e-3, n, 1234)
        pos = out["final_positions"][:, 0, 0, :]
        _, cells = TriangleLocator(mesh).locate(pos)
        assert np.all(cells >= 0)
        counts = np.bincount(cells, minlength=mesh.n_nodes)
        # expected cell masses: continuous Boltzmann density integrated over
        # each dual cell (3-point rule per fan sub-triangle)
        from crddme.quadrature import triangle_rule

        bary, bw = triangle_rule(2)
        w = np.zeros(mesh.n_nodes)
        for node in range(mesh.n_nodes):
            s, e = duals.fan_start[node], duals.fan_start[node + 1]
            for sub in range(s, e):
                tri = duals.fan_pts[sub]
                for q in range(len(bw)):
                    pt = bary[q] @ tri
                    w[node] += bw[q] * duals.fan_areas[sub] * np.exp(-pot.values(pt[None])[0])
        w /= w.sum()
        _, p_value = chisquare(counts, n * w)
        assert p_value > 0.01


class TestReversibleReaction:
    def desk_config(self, diffusivity=4.0, dt=2e-8):
        pot = QuadraticPotential(1.0)
        kernel = DoiKernel(rate=1e6, radius=0.01, gamma=0.5)
        return BDConfig(
            domain=("disk", (0.05, 0.05), 0.1),
            species=[
                BDSpecies("A", diffusivity, pot),
                BDSpecies("B", diffusivity, pot),
                BDSpecies("C", diffusivity, pot, init_count=1),
            ],
            dt=dt,
            kernel=kernel,
            dissociation=("detailed_balance", 2.0),
        )

    def test_pbound_plateau_near_third(self):
        config = self.desk_config()
        t_end = 2.5e-3
        grid = np.linspace(0.0, t_end, 11)
        n = 800
        out = bd_simulate(config, t_end, n, 2718, t_grid=grid)
        bound = (out["grid_counts"][:, 2, :] > 0).mean(axis=0)
        tail = bound[-3:]
        se = np.sqrt(np.maximum(tail * (1 - tail), 0.05) / n).max()
        assert np.all(np.abs(tail - 1 / 3) < 4 * se + 0.02)

    def test_conservation(self):
        config = self.desk_config(diffusivity=0.1, dt=1e-7)
        out = bd_simulate(config, 5e-4, 100, 5)
        n = out["final_counts"]
        # a_tot - b_tot invariant (zero here) and a_tot + c_tot = 1
        assert np.all(n[:, 0] == n[:, 1])
        assert np.all(n[:, 0] + n[:, 2] == 1)


class TestValidation:
    def test_drift_step_bound(self):
        config = BDConfig(
            domain=("square", (0.0, 0.0), 1.0),
            species=[BDSpecies("A", 1.0, QuadraticPotential(1e9), init_count=1)],
            dt=1e-2,
        )
        with pytest.raises(ValueError, match="drift step"):
            bd_simulate(config, 0.1, 1, 1)

    def test_reversible_needs_dissociation(self):
        config = BDConfig(
            domain=("square", (0.0, 0.0), 1.0),
            species=[
                BDSpecies("A", 1.0, ConstantPotential(0.0)),
                BDSpecies("B", 1.0, ConstantPotential(0.0)),
                BDSpecies("C", 1.0, ConstantPotential(0.0), init_count=1),
            ],
            dt=1e-4,
            kernel=DoiKernel(rate=10.0, radius=0.05),
        )
        with pytest.raises(ValueError, match="dissociation"):
            bd_simulate(config, 0.1, 1, 1)
