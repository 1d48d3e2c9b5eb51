"""Edge-averaged finite element assembly of drift-diffusion hop rates.

Sign convention, fixed here once: stiffness matrices are assembled as the
negative of the classical FEM form, so off-diagonal entries are nonnegative
on Delaunay meshes and columns sum to zero. A matrix in this convention is
directly a generator scaling: L = S * diag(1/|V_j|) has hop rate
L[i, j] = S[i, j] / |V_j| from cell j to cell i.

Per undirected edge the off-diagonal pair is built from one shared symmetric
factor g: S[i, j] = g * e^{phi_j - m}, S[j, i] = g * e^{phi_i - m}, with m a
per-edge shift. This makes the spatial detailed-balance identity
S[i, j] e^{-phi_j} = S[j, i] e^{-phi_i} hold to roundoff for every potential.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fields import Diffusivity, NodalPotential, values_at_nodes
from .quadrature import gauss_legendre_01

__all__ = [
    "MMatrixError",
    "RateOperator",
    "assemble_p1_laplacian",
    "assemble_eafe_stiffness",
    "transition_rate_matrix",
    "check_m_matrix",
    "verify_equilibrium",
    "lumped_mass",
]


class MMatrixError(Exception):
    def __init__(self, edges):
        self.edges = edges
        shown = ", ".join(f"({i}, {j})" for i, j, _ in edges[:8])
        more = "" if len(edges) <= 8 else f" and {len(edges) - 8} more"
        super().__init__(
            f"stiffness has negative off-diagonal entries on edges {shown}{more}; "
            "the mesh is not Delaunay so the operator is not a jump process "
            "(pass allow_nonmonotone=True for the clamped diagnostic)"
        )


def _edge_omegas(mesh):
    """Off-diagonal Laplacian stiffness per undirected edge, generator sign.

    omega_e = (cot a + cot b)/2 over the one or two incident triangles;
    nonnegative exactly when the empty-circumcircle test holds at the edge.
    """
    nodes, tris = mesh.nodes, mesh.triangles
    omega = np.zeros(len(mesh.edges))
    # classical local stiffness: K_ab = area * grad(psi_a) . grad(psi_b)
    p = nodes[tris]  # (T, 3, 2)
    for la, lb, lopp in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        ea = p[:, (la + 1) % 3] - p[:, (la + 2) % 3]
        eb = p[:, (lb + 1) % 3] - p[:, (lb + 2) % 3]
        k_ab = (ea * eb).sum(axis=1) / (4.0 * mesh.tri_areas)
        edge_ids = _edge_id_for(mesh, tris[:, la], tris[:, lb])
        np.add.at(omega, edge_ids, -k_ab)
    return omega


def _edge_id_for(mesh, a, b):
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    key = lo * mesh.n_nodes + hi
    edge_key = mesh.edges[:, 0] * mesh.n_nodes + mesh.edges[:, 1]
    order = np.argsort(edge_key)
    pos = np.searchsorted(edge_key, key, sorter=order)
    return order[pos]


def _matrix_from_edge_entries(n, edges, s_ij, s_ji):
    """Assemble with diagonal = -(column sum of off-diagonals).

    s_ij is the entry at (row i, col j), the hop j -> i; s_ji the reverse.
    """
    i, j = edges[:, 0], edges[:, 1]
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    vals = np.concatenate([s_ij, s_ji])
    diag = np.zeros(n)
    np.add.at(diag, cols, -vals)
    rows_all = np.concatenate([rows, np.arange(n)])
    cols_all = np.concatenate([cols, np.arange(n)])
    vals_all = np.concatenate([vals, diag])
    return sp.csr_matrix((vals_all, (rows_all, cols_all)), shape=(n, n))


def assemble_p1_laplacian(mesh, diffusivity=1.0):
    """Piecewise-linear stiffness for D * Laplacian, generator sign convention.

    Symmetric with zero column sums; off-diagonals are the cotangent weights.
    """
    if isinstance(diffusivity, Diffusivity):
        diffusivity = diffusivity.value
    omega = _edge_omegas(mesh) * diffusivity
    return _matrix_from_edge_entries(mesh.n_nodes, mesh.edges, omega, omega)


def _edge_factors_quadrature(mesh, potential, diffusivity, order):
    """Per-edge (g, phi_i - m, phi_j - m) from Gauss quadrature along edges."""
    qs, qw = gauss_legendre_01(order)
    i = mesh.edges[:, 0]
    j = mesh.edges[:, 1]
    pi = mesh.nodes[i]
    pj = mesh.nodes[j]
    phi_nodes = potential.values(mesh.nodes)
    phi_q = np.empty((len(qs), len(i)))
    for q, s in enumerate(qs):
        pts = pj + s * (pi - pj)
        phi_q[q] = potential.values(pts)
    if callable(diffusivity):
        inv_d = np.empty_like(phi_q)
        for q, s in enumerate(qs):
            pts = pj + s * (pi - pj)
            inv_d[q] = 1.0 / np.asarray(diffusivity(pts))
    else:
        inv_d = np.full_like(phi_q, 1.0 / diffusivity)
    m = np.maximum(phi_q.max(axis=0), np.maximum(phi_nodes[i], phi_nodes[j]))
    # average of e^{phi - m} / D along the edge; in (0, 1] / min(D)
    h = np.einsum("q,qe->e", qw, np.exp(phi_q - m) * inv_d)
    return 1.0 / h, phi_nodes[i] - m, phi_nodes[j] - m


def _edge_factors_linear(mesh, phi_nodes, diffusivity):
    """Exact closed form when the potential is linear along each edge.

    The harmonic edge-average of e^{phi - phi_j} / D reduces to the
    Bernoulli-function weight D * t / (e^t - 1) with t = phi_i - phi_j.
    """
    i = mesh.edges[:, 0]
    j = mesh.edges[:, 1]
    m = np.maximum(phi_nodes[i], phi_nodes[j])
    ei = phi_nodes[i] - m
    ej = phi_nodes[j] - m
    # g = D * t / (e^{ei} - e^{ej}); one exponent is 0 so no overflow
    t = phi_nodes[i] - phi_nodes[j]
    denom = np.exp(ei) - np.exp(ej)
    g = np.where(np.abs(t) < 1e-13, diffusivity, diffusivity * t / np.where(denom == 0, 1.0, denom))
    return g, ei, ej


def assemble_eafe_stiffness(mesh, potential, diffusivity, edge_quadrature_order=4):
    """Drift-diffusion stiffness with harmonic edge averages of e^{phi}/D.

    For constant potentials this reduces entrywise to the pure-diffusion
    stiffness. Raises on non-finite edge integrands.
    """
    if isinstance(diffusivity, Diffusivity):
        diffusivity = diffusivity.value
    if edge_quadrature_order < 2:
        raise ValueError("edge quadrature order must be >= 2")
    omega = _edge_omegas(mesh)
    if isinstance(potential, NodalPotential):
        if callable(diffusivity):
            raise TypeError("nodal potentials require constant diffusivity")
        phi = values_at_nodes(potential, mesh)
        g, ei, ej = _edge_factors_linear(mesh, phi, diffusivity)
    else:
        g, ei, ej = _edge_factors_quadrature(mesh, potential, diffusivity, edge_quadrature_order)
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(ei)) and np.all(np.isfinite(ej))):
        raise FloatingPointError("non-finite edge integrand in stiffness assembly")
    s_ij = omega * g * np.exp(ej)
    s_ji = omega * g * np.exp(ei)
    return _matrix_from_edge_entries(mesh.n_nodes, mesh.edges, s_ij, s_ji)


def lumped_mass(duals):
    return sp.diags(duals.volumes).tocsr()


def check_m_matrix(S, mesh=None, tol_scale=1e-14):
    """Report whether off-diagonals are nonnegative (generator convention)."""
    coo = S.tocoo()
    off = coo.row != coo.col
    vals = coo.data[off]
    rows = coo.row[off]
    cols = coo.col[off]
    scale = np.abs(S.data).max() if S.nnz else 1.0
    bad = vals < -tol_scale * scale
    violating = [
        (int(r), int(c), float(v)) for r, c, v in zip(rows[bad], cols[bad], vals[bad])
    ]
    return {
        "is_m_matrix": len(violating) == 0,
        "violating_edges": violating,
        "min_offdiag": float(vals.min()) if len(vals) else 0.0,
    }


@dataclass
class RateOperator:
    """Sparse hop-rate matrix; off-diagonal [i, j] is the rate from j to i."""

    matrix: sp.csr_matrix
    exit_rates: np.ndarray
    species: str = ""
    diagnostic: bool = False

    @property
    def n(self):
        return self.matrix.shape[0]


def transition_rate_matrix(S, duals, species="", allow_nonmonotone=False):
    """Scale stiffness columns by dual-cell areas: L = S diag(1/|V|).

    Refuses non-Delaunay stiffness (negative off-diagonal) unless the
    clamp-to-zero diagnostic mode is requested; clamped operators are tagged
    and rejected by the simulation pipeline.
    """
    report = check_m_matrix(S)
    diagnostic = False
    if not report["is_m_matrix"]:
        if not allow_nonmonotone:
            raise MMatrixError(report["violating_edges"])
        S = S.tocoo()
        off = S.row != S.col
        data = S.data.copy()
        data[off & (data < 0)] = 0.0
        S = sp.csr_matrix((data, (S.row, S.col)), shape=S.shape)
        # rebuild the diagonal from the clamped off-diagonals
        S = S - sp.diags(S.diagonal())
        S = S - sp.diags(np.asarray(S.sum(axis=0)).ravel())
        diagnostic = True
    vols = duals.volumes
    if np.any(vols <= 0):
        raise ValueError("dual-cell volumes must be positive")
    L = (S @ sp.diags(1.0 / vols)).tocsr()
    exit_rates = -L.diagonal()
    return RateOperator(L, exit_rates, species=species, diagnostic=diagnostic)


def verify_equilibrium(op, pbar):
    """Residuals of stationarity and edgewise detailed balance.

    stationarity_residual is max |(L P)_i| (compare against the max exit
    rate); detailed_balance_residual is the largest edgewise flux imbalance
    normalized by the largest flux.
    """
    L = op.matrix
    pbar = np.asarray(pbar)
    if L.shape[0] != len(pbar):
        raise ValueError("dimension mismatch between operator and distribution")
    stat = float(np.abs(L @ pbar).max())
    coo = L.tocoo()
    off = coo.row != coo.col
    flux = coo.data[off] * pbar[coo.col[off]]
    # pair up fluxes via a transpose lookup
    F = sp.csr_matrix((flux, (coo.row[off], coo.col[off])), shape=L.shape)
    imbalance = F - F.T
    max_flux = np.abs(flux).max() if len(flux) else 0.0
    db = float(np.abs(imbalance.data).max() / max_flux) if max_flux > 0 else 0.0
    return {
        "stationarity_residual": stat,
        "detailed_balance_residual": db,
        "max_exit_rate": float(op.exit_rates.max()) if len(op.exit_rates) else 0.0,
        "max_flux": float(max_flux),
    }
