import numpy as np
import pytest
import scipy.sparse as sp
from scipy.stats import chisquare

from conftest import rate_operator, toy_tables
from crddme.eafe import RateOperator
from crddme.fields import QuadraticPotential, discrete_gibbs_boltzmann
from crddme.fpe_oracle import (
    build_multiparticle_generator,
    build_two_particle_generator,
    transient_solve,
)
from crddme.mesh import dual_cells, generate_mesh
from crddme.reactions import DoiKernel, tabulate_association, tabulate_dissociation
from crddme.ssa import (
    KIND_ASSOC,
    KIND_HOP,
    SimulationError,
    build_alias,
    build_channels,
    channel_dependents,
    run_ensemble,
    simulate,
    stream_seeds,
)


def two_voxel_op(rate_01=2.0, rate_10=3.0):
    """Hand-built two-cell hop operator (columns sum to zero)."""
    L = np.array([[-rate_01, rate_10], [rate_01, -rate_10]])
    return RateOperator(sp.csr_matrix(L), np.array([rate_01, rate_10]))


def two_voxel_system(kd=2.0):
    """1 A + 1 B reversible system on two voxels with hand rates."""
    op = two_voxel_op()
    kp = {
        (0, 0): [(0, 5.0)],
        (1, 1): [(1, 4.0)],
        (0, 1): [(0, 1.0), (1, 1.0)],
        (1, 0): [(0, 1.0), (1, 1.0)],
    }
    km = {
        0: [(0, 0, 2.0), (0, 1, 0.5), (1, 0, 0.5)],
        1: [(1, 1, 2.0), (0, 1, 0.5), (1, 0, 0.5)],
    }
    tables = toy_tables(2, kp, km_entries=km, kd=kd)
    return op, tables


class TestBuildChannels:
    def test_diffusion_only_channel_count(self, small_disk):
        mesh, duals = small_disk
        op = rate_operator(mesh, duals, QuadraticPotential(1.0), 1.0)
        table = build_channels([op], ["A"])
        nnz_off = op.matrix.nnz - mesh.n_nodes
        assert table.n_channels == nnz_off
        assert np.all(table.kind == KIND_HOP)

    def test_reactive_propensity_enumeration(self):
        op, tables = two_voxel_system()
        table = build_channels([op, op, op], ["A", "B", "C"], tables=tables,
                               bimolecular=("A", "B", "C"))
        counts = np.zeros((3, 2), dtype=np.int64)
        counts[0, 0] = 1  # A in voxel 0
        counts[1, 1] = 1  # B in voxel 1
        # only the (0, 1) association channel has nonzero reactive propensity
        for c in range(table.n_channels):
            if table.kind[c] == KIND_ASSOC:
                a = table.base[c] * counts[0, table.q0[c]] * counts[1, table.q1[c]]
                if (table.q0[c], table.q1[c]) == (0, 1):
                    assert a == pytest.approx(2.0)
                else:
                    assert a == 0.0

    def test_channel_count_formula(self):
        op, tables = two_voxel_system()
        table = build_channels(
            [op, op, op], ["A", "B", "C"], tables=tables,
            bimolecular=("A", "B", "C"), linear=[("A", "B", 1.0), ("B", "A", 0.5)],
        )
        hops = 3 * 2          # two off-diagonal entries per species
        assoc = tables.n_pairs
        dissoc = 2
        lin = 2 * 2
        assert table.n_channels == hops + assoc + dissoc + lin

    def test_dependency_closure_hop(self, small_disk):
        mesh, duals = small_disk
        op = rate_operator(mesh, duals, QuadraticPotential(1.0), 1.0)
        table = build_channels([op], ["A"])
        c = 0
        sp_, j, i = table.q0[c], table.q1[c], table.q2[c]
        deps = channel_dependents(table, c)
        expected = {
            ch for ch in range(table.n_channels)
            if table.q1[ch] in (i, j)
        }
        assert deps == expected

    def test_same_species_pair_rejected(self):
        op, tables = two_voxel_system()
        with pytest.raises(ValueError):
            build_channels([op, op], ["A", "C"], tables=tables, bimolecular=("A", "A", "C"))

    def test_diagnostic_operator_rejected(self):
        op = two_voxel_op()
        op.diagnostic = True
        with pytest.raises(ValueError):
            build_channels([op], ["A"])


class TestAlias:
    def test_alias_distribution(self):
        w = np.array([0.1, 0.5, 0.2, 0.2])
        prob, alias = build_alias(w)
        # exhaustive check: P(slot outcomes) equals weights
        n = len(w)
        got = np.zeros(n)
        for idx in range(n):
            got[idx] += prob[idx] / n
            got[alias[idx]] += (1 - prob[idx]) / n
        assert np.allclose(got, w / w.sum())

    def test_alias_bad_weights(self):
        with pytest.raises(ValueError):
            build_alias([0.0, 0.0])


class TestDeterminism:
    def test_same_master_seed_bitwise(self):
        op, tables = two_voxel_system()
        table = build_channels([op, op, op], ["A", "B", "C"], tables=tables,
                               bimolecular=("A", "B", "C"))
        base = np.zeros((3, 2), dtype=np.int64)
        base[2, 0] = 1
        grid = np.linspace(0, 1.0, 7)
        a = run_ensemble(table, base, 1.0, 64, 42, t_grid=grid)
        b = run_ensemble(table, base, 1.0, 64, 42, t_grid=grid)
        assert np.array_equal(a["grid_counts"], b["grid_counts"])
        assert np.array_equal(a["binding_times"], b["binding_times"], equal_nan=True)
        c = run_ensemble(table, base, 1.0, 64, 43, t_grid=grid)
        assert not np.array_equal(a["grid_counts"], c["grid_counts"])

    def test_stream_seeds_documented_derivation(self):
        seeds = stream_seeds(7, 3)
        for r in range(3):
            expected = np.random.SeedSequence(7, spawn_key=(r,)).generate_state(1, np.uint32)[0]
            assert seeds[r] == expected


class TestConservation:
    def test_reversible_invariants(self):
        op, tables = two_voxel_system()
        table = build_channels([op, op, op], ["A", "B", "C"], tables=tables,
                               bimolecular=("A", "B", "C"))
        counts0 = np.zeros((3, 2), dtype=np.int64)
        counts0[0, 0] = 1
        counts0[1, 1] = 1
        log = simulate(table, counts0, 5.0, seed=11)
        counts = counts0.copy()
        state = counts.sum(axis=1)
        assert state[0] == state[1]
        sp_a, sp_b, sp_c = log.meta_sp
        run = counts0.copy()
        for k, d in zip(log.kinds, log.data):
            if k == KIND_HOP:
                run[d[0], d[1]] -= 1
                run[d[0], d[2]] += 1
            elif k == KIND_ASSOC:
                run[sp_a, d[0]] -= 1
                run[sp_b, d[1]] -= 1
                run[sp_c, d[2]] += 1
            else:
                run[sp_c, d[0]] -= 1
                run[sp_a, d[1]] += 1
                run[sp_b, d[2]] += 1
            t = run.sum(axis=1)
            assert t[0] == t[1]
            assert t[0] + t[2] == 1

    def test_replay_reproduces_final_state(self):
        op, tables = two_voxel_system()
        table = build_channels([op, op, op], ["A", "B", "C"], tables=tables,
                               bimolecular=("A", "B", "C"))
        counts0 = np.zeros((3, 2), dtype=np.int64)
        counts0[2, 1] = 1
        log = simulate(table, counts0, 3.0, seed=5)
        assert np.array_equal(log.replay(), log.final_counts)
        assert np.all(np.diff(log.times) >= 0)


class TestStatisticalExactness:
    def test_single_particle_occupancy_matches_gibbs(self):
        mesh = generate_mesh("disk", 1, center=(0.05, 0.05), size=0.1)
        duals = dual_cells(mesh)
        pot = QuadraticPotential(30.0)
        op = rate_operator(mesh, duals, pot, 10.0)
        table = build_channels([op], ["A"])
        base = np.zeros((1, mesh.n_nodes), dtype=np.int64)
        # relax well past the slowest mixing time, then read the final voxel
        out = run_ensemble(
            table, base, 0.01, 20000, 123,
            random_inits=[("A", 1)], init_weights=duals.volumes,
            snapshot_times=[0.01],
        )
        final = out["snapshots"][:, 0, 0, :]
        counts = final.sum(axis=0)
        _, pbar = discrete_gibbs_boltzmann(mesh, duals, pot)
        _, p_value = chisquare(counts, 20000 * pbar)
        assert p_value > 0.01

    def test_two_voxel_occupancy_matches_master_equation(self):
        op, tables = two_voxel_system()
        table = build_channels([op, op, op], ["A", "B", "C"], tables=tables,
                               bimolecular=("A", "B", "C"))
        counts0 = np.zeros((3, 2), dtype=np.int64)
        counts0[0, 0] = 1
        counts0[1, 0] = 1
        t_star = 0.35
        n = 100000
        out = run_ensemble(table, counts0, t_star, n, 77, snapshot_times=[t_star])
        snaps = out["snapshots"][:, 0]  # (n, 3, 2)
        gen = build_multiparticle_generator(
            [op, op, op], tables=tables, initial_counts=counts0, bimolecular=(0, 1, 2)
        )
        p0 = np.zeros(gen.Q.shape[0])
        p0[gen.state_index(counts0)] = 1.0
        P = transient_solve(gen, p0, np.array([0.0, t_star]))[:, -1]
        keys = [tuple(s.ravel()) for s in gen.states]
        observed = {k: 0 for k in keys}
        for r in range(n):
            observed[tuple(snaps[r].ravel())] += 1
        for k, p_exact in zip(keys, P):
            o = observed[k]
            sigma = np.sqrt(n * p_exact * (1 - p_exact))
            assert abs(o - n * p_exact) <= 3.5 * sigma + 1e-9, (k, o, n * p_exact)

    def test_annihilation_binding_times_match_oracle(self):
        mesh = generate_mesh("disk", 1, center=(0.05, 0.05), size=0.1)
        duals = dual_cells(mesh)
        pot = QuadraticPotential(1.0)
        op = rate_operator(mesh, duals, pot, 10.0)
        kernel = DoiKernel(rate=1e9, radius=0.03)
        tables = tabulate_association(mesh, duals, kernel, samples_per_pair=20000, seed=31)
        table = build_channels([op, op], ["A", "B"], tables=tables, bimolecular=("A", "B", None))
        base = np.zeros((2, mesh.n_nodes), dtype=np.int64)
        out = run_ensemble(
            table, base, 1.0, 4000, 2024,
            random_inits=[("A", 1), ("B", 1)], init_weights=duals.volumes,
            stop_after_first_assoc=True,
        )
        times = out["binding_times"]
        assert np.isfinite(times).all()
        gen = build_two_particle_generator(op, op, None, tables, mode="annihilation")
        w = duals.volumes / duals.total_volume()
        p0 = np.outer(w, w).ravel()
        from crddme.fpe_oracle import mean_absorption_time

        mbt, _ = mean_absorption_time(gen, p0)
        se = times.std(ddof=1) / np.sqrt(len(times))
        assert abs(times.mean() - mbt) <= 3 * se


class TestErrors:
    def test_negative_initial_counts_rejected(self):
        op, tables = two_voxel_system()
        table = build_channels([op], ["A"])
        with pytest.raises(ValueError):
            simulate(table, -np.ones((1, 2), dtype=int), 1.0, 1)

    def test_wrong_shape_rejected(self):
        op, _ = two_voxel_system()
        table = build_channels([op], ["A"])
        with pytest.raises(ValueError):
            simulate(table, np.zeros((2, 2), dtype=int), 1.0, 1)

    def test_event_cap(self):
        op, _ = two_voxel_system()
        table = build_channels([op], ["A"])
        counts0 = np.array([[50, 0]], dtype=np.int64)
        with pytest.raises(SimulationError, match="capacity"):
            simulate(table, counts0, 1000.0, seed=3, max_events=100)
