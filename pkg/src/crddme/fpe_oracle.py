"""Deterministic solvers used as oracles for the stochastic paths.

Contains the steady-state accuracy study (sparse solve of the reaction
drift-diffusion equation), refinement error reports, and direct
master-equation solvers for small reversible/annihilation systems.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .eafe import assemble_eafe_stiffness
from .quadrature import triangle_rule

__all__ = [
    "NumericsError",
    "SteadySolveSpec",
    "solve_steady_state",
    "error_report",
    "TwoParticleGenerator",
    "build_two_particle_generator",
    "build_multiparticle_generator",
    "oracle_solve",
    "stationary_distribution",
    "transient_solve",
    "mean_absorption_time",
    "survival_curve",
]

STATE_CAP = 20000


class NumericsError(Exception):
    """Raised when a linear or ODE solve misses its tolerance contract."""


@dataclass
class SteadySolveSpec:
    mesh: object
    potential: object
    diffusivity: float
    forcing: object  # callable (n, 2) -> (n,)
    exact: object = None  # optional callable (n, 2) -> (n,)
    quad_degree: int = 4


def _load_vector(mesh, forcing, degree):
    """F_i = integral of basis_i * forcing via per-triangle Gauss quadrature."""
    bary, w = triangle_rule(degree)
    tris = mesh.triangles
    nodes = mesh.nodes
    p0, p1, p2 = nodes[tris[:, 0]], nodes[tris[:, 1]], nodes[tris[:, 2]]
    F = np.zeros(mesh.n_nodes)
    for q in range(bary.shape[0]):
        pts = bary[q, 0] * p0 + bary[q, 1] * p1 + bary[q, 2] * p2
        fv = w[q] * mesh.tri_areas * forcing(pts)
        for local in range(3):
            np.add.at(F, tris[:, local], bary[q, local] * fv)
    return F


def solve_steady_state(spec):
    """Solve (-S + M) rho = F with lumped mass M and EAFE stiffness S."""
    from .mesh import dual_cells

    duals = dual_cells(spec.mesh)
    S = assemble_eafe_stiffness(spec.mesh, spec.potential, spec.diffusivity)
    A = (-S + sp.diags(duals.volumes)).tocsc()
    F = _load_vector(spec.mesh, spec.forcing, spec.quad_degree)
    rho = spla.spsolve(A, F)
    res = np.linalg.norm(A @ rho - F) / max(np.linalg.norm(F), 1e-300)
    if not np.isfinite(rho).all() or res > 1e-10:
        raise NumericsError(f"steady solve residual {res:.3e} exceeds 1e-10")
    return rho


def _consistent_mass(mesh):
    """P1 mass matrix; the quadratic form d' M d is the exact L2 norm of
    the piecewise-linear interpolant of d."""
    tris = mesh.triangles
    rows, cols, vals = [], [], []
    for a in range(3):
        for b in range(3):
            rows.append(tris[:, a])
            cols.append(tris[:, b])
            coef = 1 / 6 if a == b else 1 / 12
            vals.append(coef * mesh.tri_areas)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))


def error_report(solutions, meshes, exact=None):
    """L2 errors and empirical orders across a refinement hierarchy.

    Without an exact solution, errors compare consecutive levels at the
    retained coarse nodes (the refinement keeps coarse node indices as the
    leading block). Orders are log2 ratios of consecutive errors.
    """
    if len(solutions) < 2:
        raise ValueError("need at least two refinement levels")
    for lvl in range(len(solutions) - 1):
        if len(solutions[lvl]) > len(solutions[lvl + 1]):
            raise ValueError("solutions are not ordered coarse to fine")
    errors = []
    if exact is not None:
        for sol, mesh in zip(solutions, meshes):
            d = sol - exact(mesh.nodes)
            M = _consistent_mass(mesh)
            errors.append(float(np.sqrt(d @ (M @ d))))
    else:
        for lvl in range(len(solutions) - 1):
            coarse = solutions[lvl]
            fine = solutions[lvl + 1][: len(coarse)]
            d = coarse - fine
            M = _consistent_mass(meshes[lvl])
            errors.append(float(np.sqrt(d @ (M @ d))))
    errors = np.array(errors)
    if np.any(errors == 0):
        rates = np.full(max(len(errors) - 1, 0), np.nan)
    else:
        rates = np.log2(errors[:-1] / errors[1:])
    return {"errors": errors, "rates": rates}


@dataclass
class TwoParticleGenerator:
    """Master-equation generator over {unbound (i, j)} (+ {bound k}).

    Column convention: dP/dt = Q P, off-diagonals nonnegative, column sums
    zero (reversible) or <= 0 (annihilation, absorbing).
    """

    Q: sp.csr_matrix
    n_voxels: int
    mode: str

    @property
    def n_unbound(self):
        return self.n_voxels * self.n_voxels

    def unbound_index(self, i, j):
        return i * self.n_voxels + j

    def bound_index(self, k):
        return self.n_unbound + k


def build_two_particle_generator(op_a, op_b, op_c, tables, mode="reversible", state_cap=STATE_CAP):
    """Assemble the coupled hop + reaction generator for one A and one B.

    reversible couples the N^2 unbound states to N bound states through the
    placement tables; annihilation drops the bound block and treats pair
    reaction as absorption.
    """
    N = op_a.n
    if op_b.n != N or (op_c is not None and op_c.n != N) or tables.n_voxels != N:
        raise ValueError("operators and tables must share one mesh")
    n_states = N * N + (N if mode == "reversible" else 0)
    if n_states > state_cap:
        raise NumericsError(f"state space {n_states} exceeds cap {state_cap}")

    eye = sp.identity(N, format="csr")
    hop = (sp.kron(op_a.matrix, eye, format="coo") + sp.kron(eye, op_b.matrix, format="coo")).tocoo()

    rows = [hop.row.astype(np.int64)]
    cols = [hop.col.astype(np.int64)]
    vals = [hop.data]

    pair_cols = tables.pairs[:, 0] * N + tables.pairs[:, 1]
    # association: leave column (i, j) toward bound voxel k, drain diagonal
    rows.append(pair_cols)
    cols.append(pair_cols)
    vals.append(-tables.kplus_pair)

    if mode == "annihilation":
        Q = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_states, n_states),
        )
        return TwoParticleGenerator(Q, N, mode)

    if mode != "reversible":
        raise ValueError(f"unknown mode {mode!r}")
    if tables.km_total is None:
        raise ValueError("reversible mode needs dissociation tables")

    pair_of_entry = np.repeat(np.arange(tables.n_pairs), np.diff(tables.pl_start))
    rows.append(N * N + tables.pl_voxel)
    cols.append(pair_cols[pair_of_entry])
    vals.append(tables.pl_rate)

    bound = op_c.matrix.tocoo()
    rows.append(N * N + bound.row.astype(np.int64))
    cols.append(N * N + bound.col.astype(np.int64))
    vals.append(bound.data)

    vox_of_entry = np.repeat(np.arange(N), np.diff(tables.dis_start))
    rows.append(tables.dis_i * N + tables.dis_j)
    cols.append(N * N + vox_of_entry)
    vals.append(tables.dis_rate)
    rows.append(N * N + np.arange(N))
    cols.append(N * N + np.arange(N))
    vals.append(-tables.km_total)

    Q = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_states, n_states),
    )
    colsum = np.abs(np.asarray(Q.sum(axis=0))).max()
    scale = np.abs(Q.data).max() if Q.nnz else 1.0
    if colsum > 1e-10 * scale:
        raise NumericsError(f"reversible generator columns sum to {colsum:.3e}")
    return TwoParticleGenerator(Q, N, mode)


def stationary_distribution(gen, tol=1e-10):
    """Probability nullspace vector of a conservative generator."""
    Q = getattr(gen, "Q", gen)
    n = Q.shape[0]
    A = Q.tolil(copy=True)
    A[n - 1, :] = 1.0
    rhs = np.zeros(n)
    rhs[n - 1] = 1.0
    p = spla.spsolve(A.tocsc(), rhs)
    res = np.abs(Q @ p).max()
    scale = np.abs(Q.data).max() if Q.nnz else 1.0
    if not np.isfinite(p).all() or res > tol * scale or p.min() < -1e-8:
        raise NumericsError(
            f"stationary solve failed (residual {res:.3e}); the chain may be reducible"
        )
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def transient_solve(gen, p0, t_grid, rtol=1e-8):
    """Integrate dP/dt = Q P with stiff-capable error control."""
    Q = getattr(gen, "Q", gen)
    t_grid = np.asarray(t_grid, dtype=float)
    t0 = 0.0

    def rhs(t, p):
        return Q @ p

    out = solve_ivp(
        rhs,
        (t0, float(t_grid[-1])),
        np.asarray(p0, dtype=float),
        method="BDF",
        t_eval=t_grid,
        jac=Q,
        rtol=rtol,
        atol=1e-12,
    )
    if not out.success:
        raise NumericsError(f"transient solve failed: {out.message}")
    return out.y  # (n_states, n_times)


def mean_absorption_time(gen, p0):
    """Mean time to absorption for a substochastic generator.

    Solves Q^T tau = -1 over the transient states and averages over the
    initial distribution.
    """
    Q = getattr(gen, "Q", gen)
    n = Q.shape[0]
    tau = spla.spsolve(Q.T.tocsc(), -np.ones(n))
    if not np.isfinite(tau).all() or tau.min() < 0:
        raise NumericsError("absorption-time solve produced invalid values")
    return float(np.dot(np.asarray(p0), tau)), tau


def survival_curve(gen, p0, t_grid, rtol=1e-8):
    """Survival probability (no absorption yet) on a time grid."""
    P = transient_solve(gen, p0, t_grid, rtol=rtol)
    return P.sum(axis=0)


def oracle_solve(gen, task, p0=None, t_grid=None):
    """Dispatch: task in {"stationary", "transient", "mean_binding_time"}."""
    if task == "stationary":
        return stationary_distribution(gen)
    if task == "transient":
        return transient_solve(gen, p0, t_grid)
    if task == "mean_binding_time":
        return mean_absorption_time(gen, p0)[0]
    raise ValueError(f"unknown oracle task {task!r}")


@dataclass
class MultiparticleGenerator:
    Q: sp.csr_matrix
    states: list
    index: dict = field(repr=False)

    def state_index(self, counts):
        return self.index[tuple(np.asarray(counts).ravel())]


def build_multiparticle_generator(
    rate_ops, tables=None, linear_reactions=(), initial_counts=None,
    bimolecular=None, state_cap=STATE_CAP,
):
    """Brute-force master equation on copy-number states, by breadth-first
    enumeration of everything reachable from the initial counts.

    rate_ops: list of hop operators per species (None for immobile).
    bimolecular: (species_a, species_b, species_c) indices or None; with
    species_c < 0 the pair annihilates. linear_reactions: (src, dst, rate).
    Propensities follow mass action: hops rate*n, pair channels k*a_i*b_j,
    dissociation k*c_k.
    """
    initial = np.asarray(initial_counts, dtype=np.int64)
    n_species, N = initial.shape

    transitions_from = []

    hop_entries = []
    for op in rate_ops:
        if op is None:
            hop_entries.append([])
            continue
        coo = op.matrix.tocoo()
        hop_entries.append(
            [(int(i), int(j), float(r)) for i, j, r in zip(coo.row, coo.col, coo.data)
             if i != j and r != 0.0]
        )

    def hop_moves(state):
        moves = []
        for s in range(n_species):
            for i, j, r in hop_entries[s]:
                nj = state[s, j]
                if nj > 0:
                    new = state.copy()
                    new[s, j] -= 1
                    new[s, i] += 1
                    moves.append((new, r * nj))
        return moves

    def linear_moves(state):
        moves = []
        for src, dst, rate in linear_reactions:
            for v in range(N):
                n = state[src, v]
                if n > 0:
                    new = state.copy()
                    new[src, v] -= 1
                    new[dst, v] += 1
                    moves.append((new, rate * n))
        return moves

    def reaction_moves(state):
        moves = []
        if tables is None or bimolecular is None:
            return moves
        sa, sb, sc = bimolecular
        for p in range(tables.n_pairs):
            i, j = tables.pairs[p]
            na, nb = state[sa, i], state[sb, j]
            if na == 0 or nb == 0:
                continue
            if sa == sb and i == j and na < 2:
                continue
            mult = na * (nb - 1) if (sa == sb and i == j) else na * nb
            ks, rates = tables.placement_slice(p)
            for k, r in zip(ks, rates):
                new = state.copy()
                new[sa, i] -= 1
                new[sb, j] -= 1
                if sc >= 0:
                    new[sc, k] += 1
                moves.append((new, r * mult))
        if sc >= 0 and tables.km_total is not None:
            for k in range(N):
                nc = state[sc, k]
                if nc == 0:
                    continue
                ii, jj, rr = tables.dissociation_slice(k)
                for i, j, r in zip(ii, jj, rr):
                    new = state.copy()
                    new[sc, k] -= 1
                    new[sa, i] += 1
                    new[sb, j] += 1
                    moves.append((new, r * nc))
        return moves

    states = []
    index = {}

    def intern(state):
        key = tuple(state.ravel())
        if key not in index:
            if len(states) >= state_cap:
                raise NumericsError(f"reachable state space exceeds cap {state_cap}")
            index[key] = len(states)
            states.append(state)
        return index[key]

    intern(initial)
    frontier = [0]
    while frontier:
        sid = frontier.pop()
        state = states[sid]
        moves = hop_moves(state) + linear_moves(state) + reaction_moves(state)
        transitions_from.append((sid, moves))
        for new, _ in moves:
            key = tuple(new.ravel())
            if key not in index:
                intern(new)
                frontier.append(index[key])

    n = len(states)
    rows, cols, vals = [], [], []
    for sid, moves in transitions_from:
        total = 0.0
        for new, rate in moves:
            rows.append(index[tuple(new.ravel())])
            cols.append(sid)
            vals.append(rate)
            total += rate
        rows.append(sid)
        cols.append(sid)
        vals.append(-total)
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return MultiparticleGenerator(Q, states, index)
