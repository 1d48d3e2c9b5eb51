"""Finite-volume reaction rate tables for the A + B <-> C pair reaction.

Association rates are tabulated by deterministic low-discrepancy sampling
over dual-cell pairs: the same accepted sample set produces both the pair
rate k+_{ij} and its placement split k+_{ijk}, so sum_k k+_{ijk} == k+_{ij}
bit-exactly. Dissociation rates are derived from the association table
through the discrete detailed-balance identity, or set to a fixed rate with
Boltzmann-weighted placement.
"""

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit, prange
from scipy.spatial import cKDTree

from .fields import values_at_nodes
from .mesh import TriangleLocator
from .quadrature import ball_rule

__all__ = [
    "DoiKernel",
    "ReactionTables",
    "tabulate_association",
    "tabulate_dissociation",
    "continuous_unbind_rate",
    "unbind_separation_sampler",
    "save_tables",
    "load_tables",
]

_SLOTS = 256  # per-pair open-addressing capacity for placement voxels


@dataclass(frozen=True)
class DoiKernel:
    """Indicator association kernel: attempt rate, reaction radius, placement.

    A pair within `radius` reacts with probability per time `rate`; the
    product is placed at gamma*x + (1-gamma)*y.
    """

    rate: float
    radius: float
    gamma: float = 0.5

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("kernel rate must be nonnegative")
        if not self.radius > 0:
            raise ValueError("reaction radius must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")


@dataclass
class ReactionTables:
    """Sparse reaction transition rates over ordered dual-cell pairs.

    pairs[p] = (i, j) with association rate kplus_pair[p]; its placement
    entries live in pl_voxel/pl_rate[pl_start[p]:pl_start[p+1]], sorted by
    target voxel. Dissociation entries per source voxel k live in
    dis_i/dis_j/dis_rate[dis_start[k]:dis_start[k+1]] with total km_total[k].
    """

    n_voxels: int
    pairs: np.ndarray
    kplus_pair: np.ndarray
    pl_start: np.ndarray
    pl_voxel: np.ndarray
    pl_rate: np.ndarray
    kernel: DoiKernel
    seed: int
    samples_per_pair: int
    mesh_hash: str = ""
    escaped_fraction: float = 0.0
    km_total: np.ndarray = field(default=None, repr=False)
    dis_start: np.ndarray = field(default=None, repr=False)
    dis_i: np.ndarray = field(default=None, repr=False)
    dis_j: np.ndarray = field(default=None, repr=False)
    dis_rate: np.ndarray = field(default=None, repr=False)
    dissociation_mode: str = ""
    kd: float = 0.0
    mu: float = 0.0

    @property
    def n_pairs(self):
        return len(self.pairs)

    def pair_index(self):
        return {(int(i), int(j)): p for p, (i, j) in enumerate(self.pairs)}

    def placement_slice(self, p):
        s, e = self.pl_start[p], self.pl_start[p + 1]
        return self.pl_voxel[s:e], self.pl_rate[s:e]

    def dissociation_slice(self, k):
        s, e = self.dis_start[k], self.dis_start[k + 1]
        return self.dis_i[s:e], self.dis_j[s:e], self.dis_rate[s:e]


# 6-dimensional Kronecker lattice directions: fractional parts of sqrt(prime)
_ALPHA = np.sqrt(np.array([2.0, 3.0, 5.0, 7.0, 11.0, 13.0])) % 1.0


@njit(cache=True, inline="always")
def _splitmix_unit(seed, i, j, d):
    z = np.uint64(seed) ^ (np.uint64(i + 1) * np.uint64(0x9E3779B97F4A7C15))
    z ^= np.uint64(j + 1) * np.uint64(0xC2B2AE3D27D4EB4F)
    z ^= np.uint64(d + 1) * np.uint64(0xD6E8FEB86659FD93)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, inline="always")
def _cell_point(node, u0, u1, u2, fan_start, fan_cdf, fan_pts):
    s = fan_start[node]
    e = fan_start[node + 1]
    lo, hi = s, e - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if fan_cdf[mid] < u0:
            lo = mid + 1
        else:
            hi = mid
    r = np.sqrt(u1)
    w0 = 1.0 - r
    w1 = r * (1.0 - u2)
    w2 = r * u2
    x = w0 * fan_pts[lo, 0, 0] + w1 * fan_pts[lo, 1, 0] + w2 * fan_pts[lo, 2, 0]
    y = w0 * fan_pts[lo, 0, 1] + w1 * fan_pts[lo, 1, 1] + w2 * fan_pts[lo, 2, 1]
    return x, y


@njit(cache=True, inline="always")
def _locate_cell(px, py, nodes, tris, grid_start, grid_items, nx, ny, gx0, gy0, gdx, gdy):
    cx = int((px - gx0) / gdx)
    cy = int((py - gy0) / gdy)
    cx = min(max(cx, 0), nx - 1)
    cy = min(max(cy, 0), ny - 1)
    c = cx * ny + cy
    for s in range(grid_start[c], grid_start[c + 1]):
        t = grid_items[s]
        i0, i1, i2 = tris[t, 0], tris[t, 1], tris[t, 2]
        x1, y1 = nodes[i0, 0], nodes[i0, 1]
        x2, y2 = nodes[i1, 0], nodes[i1, 1]
        x3, y3 = nodes[i2, 0], nodes[i2, 1]
        det = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
        l1 = ((x2 - px) * (y3 - py) - (x3 - px) * (y2 - py)) / det
        l2 = ((x3 - px) * (y1 - py) - (x1 - px) * (y3 - py)) / det
        l3 = 1.0 - l1 - l2
        if l1 >= -1e-12 and l2 >= -1e-12 and l3 >= -1e-12:
            if l1 >= l2 and l1 >= l3:
                return i0
            elif l2 >= l3:
                return i1
            return i2
    return -1


@njit(cache=True, inline="always")
def _snap_boundary(px, py, boundary_ids, nodes):
    best = boundary_ids[0]
    bd = 1e300
    for b in boundary_ids:
        d = (nodes[b, 0] - px) ** 2 + (nodes[b, 1] - py) ** 2
        if d < bd:
            bd = d
            best = b
    return best


@njit(cache=True, inline="always")
def _slot_insert(slots_k, slots_c, row, k):
    h = k % _SLOTS
    for probe in range(_SLOTS):
        s = (h + probe) % _SLOTS
        cur = slots_k[row, s]
        if cur == k:
            slots_c[row, s] += 1
            return True
        if cur == -1:
            slots_k[row, s] = k
            slots_c[row, s] = 1
            return True
    return False


@njit(parallel=True, cache=True)
def _tabulate_batch(
    pairs, n_samples, seed, rb2, gamma, alpha,
    fan_start, fan_cdf, fan_pts,
    nodes, tris, grid_start, grid_items, nx, ny, gx0, gy0, gdx, gdy,
    boundary_ids,
    out_accept, out_escaped, out_overflow,
    slots_k_ij, slots_c_ij, slots_k_ji, slots_c_ji,
):
    for p in prange(pairs.shape[0]):
        i = pairs[p, 0]
        j = pairs[p, 1]
        v0 = _splitmix_unit(seed, i, j, 0)
        v1 = _splitmix_unit(seed, i, j, 1)
        v2 = _splitmix_unit(seed, i, j, 2)
        v3 = _splitmix_unit(seed, i, j, 3)
        v4 = _splitmix_unit(seed, i, j, 4)
        v5 = _splitmix_unit(seed, i, j, 5)
        n_acc = 0
        n_esc = 0
        overflow = False
        for _ in range(n_samples):
            v0 += alpha[0]
            if v0 >= 1.0:
                v0 -= 1.0
            v1 += alpha[1]
            if v1 >= 1.0:
                v1 -= 1.0
            v2 += alpha[2]
            if v2 >= 1.0:
                v2 -= 1.0
            v3 += alpha[3]
            if v3 >= 1.0:
                v3 -= 1.0
            v4 += alpha[4]
            if v4 >= 1.0:
                v4 -= 1.0
            v5 += alpha[5]
            if v5 >= 1.0:
                v5 -= 1.0
            xa, ya = _cell_point(i, v0, v1, v2, fan_start, fan_cdf, fan_pts)
            xb, yb = _cell_point(j, v3, v4, v5, fan_start, fan_cdf, fan_pts)
            dx = xa - xb
            dy = ya - yb
            if dx * dx + dy * dy > rb2:
                continue
            n_acc += 1
            zx = gamma * xa + (1.0 - gamma) * xb
            zy = gamma * ya + (1.0 - gamma) * yb
            k = _locate_cell(zx, zy, nodes, tris, grid_start, grid_items, nx, ny, gx0, gy0, gdx, gdy)
            if k < 0:
                n_esc += 1
                k = _snap_boundary(zx, zy, boundary_ids, nodes)
            if not _slot_insert(slots_k_ij, slots_c_ij, p, k):
                overflow = True
            if i != j:
                if gamma == 0.5:
                    k2 = k
                else:
                    z2x = gamma * xb + (1.0 - gamma) * xa
                    z2y = gamma * yb + (1.0 - gamma) * ya
                    k2 = _locate_cell(z2x, z2y, nodes, tris, grid_start, grid_items, nx, ny, gx0, gy0, gdx, gdy)
                    if k2 < 0:
                        n_esc += 1
                        k2 = _snap_boundary(z2x, z2y, boundary_ids, nodes)
                if not _slot_insert(slots_k_ji, slots_c_ji, p, k2):
                    overflow = True
        out_accept[p] = n_acc
        out_escaped[p] = n_esc
        out_overflow[p] = overflow


def _candidate_pairs(duals, radius):
    """Unordered (i <= j) pairs whose cells can hold points within `radius`."""
    nodes = duals.mesh.nodes
    reach = duals.reach
    tree = cKDTree(nodes)
    cut = radius + 2.0 * reach.max()
    raw = tree.query_pairs(cut, output_type="ndarray")
    if len(raw):
        d = np.hypot(*(nodes[raw[:, 0]] - nodes[raw[:, 1]]).T)
        keep = d <= radius + reach[raw[:, 0]] + reach[raw[:, 1]]
        raw = raw[keep]
    self_pairs = np.column_stack([np.arange(len(nodes))] * 2)
    pairs = np.vstack([self_pairs, np.sort(raw, axis=1)]) if len(raw) else self_pairs
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return np.ascontiguousarray(pairs[order], dtype=np.int64)


def tabulate_association(mesh, duals, kernel, samples_per_pair=10000, seed=0, locator=None):
    """Monte Carlo tabulation of k+_{ij} and its placement split k+_{ijk}.

    Samples are a per-pair shifted Kronecker lattice, deterministic in
    (mesh, kernel, seed, samples_per_pair). Placement points falling outside
    the triangulation snap to the nearest boundary cell.
    """
    if samples_per_pair < 1000:
        raise ValueError("samples_per_pair must be at least 1000")
    if locator is None:
        locator = TriangleLocator(mesh)
    pairs = _candidate_pairs(duals, kernel.radius)

    fan_cdf = np.empty(len(duals.fan_areas))
    for n in range(duals.mesh.n_nodes):
        s, e = duals.fan_start[n], duals.fan_start[n + 1]
        c = np.cumsum(duals.fan_areas[s:e])
        fan_cdf[s:e] = c / c[-1]

    boundary_ids = np.unique(mesh.boundary_edges.ravel()).astype(np.int64)
    loc_args = locator.kernel_args()

    batch = 2048
    total_accept = 0
    total_escaped = 0
    placement = {}  # ordered (i, j) -> (k array, count array)
    for b0 in range(0, len(pairs), batch):
        chunk = pairs[b0: b0 + batch]
        nb = len(chunk)
        slots_k_ij = np.full((nb, _SLOTS), -1, dtype=np.int64)
        slots_c_ij = np.zeros((nb, _SLOTS), dtype=np.int64)
        slots_k_ji = np.full((nb, _SLOTS), -1, dtype=np.int64)
        slots_c_ji = np.zeros((nb, _SLOTS), dtype=np.int64)
        a = np.zeros(nb, dtype=np.int64)
        e = np.zeros(nb, dtype=np.int64)
        ovf = np.zeros(nb, dtype=np.bool_)
        _tabulate_batch(
            chunk, samples_per_pair, seed, kernel.radius**2, kernel.gamma, _ALPHA,
            duals.fan_start, fan_cdf, duals.fan_pts,
            *loc_args, boundary_ids,
            a, e, ovf,
            slots_k_ij, slots_c_ij, slots_k_ji, slots_c_ji,
        )
        if ovf.any():
            raise RuntimeError(
                "placement voxel capacity exceeded; the reaction radius spans "
                f"more than {_SLOTS} cells per pair at this resolution"
            )
        total_accept += int(a.sum())
        total_escaped += int(e.sum())
        for r in range(nb):
            if a[r] == 0:
                continue
            i, j = int(chunk[r, 0]), int(chunk[r, 1])
            mask = slots_c_ij[r] > 0
            placement[(i, j)] = (slots_k_ij[r, mask].copy(), slots_c_ij[r, mask].copy())
            if i != j:
                mask = slots_c_ji[r] > 0
                placement[(j, i)] = (slots_k_ji[r, mask].copy(), slots_c_ji[r, mask].copy())

    if not placement:
        warnings.warn("no dual-cell pair produced accepted samples; tables are empty")

    keys = sorted(placement)
    out_pairs = (
        np.array(keys, dtype=np.int64).reshape(-1, 2) if keys else np.zeros((0, 2), dtype=np.int64)
    )
    pl_start = np.zeros(len(keys) + 1, dtype=np.int64)
    pl_voxel = []
    pl_rate = []
    kplus = np.zeros(len(keys))
    scale = kernel.rate / samples_per_pair
    for p, key in enumerate(keys):
        ks, cs = placement[key]
        order = np.argsort(ks)
        rates = cs[order] * scale
        pl_voxel.append(ks[order])
        pl_rate.append(rates)
        kplus[p] = np.sum(rates)
        pl_start[p + 1] = pl_start[p] + len(ks)
    pl_voxel = np.concatenate(pl_voxel) if pl_voxel else np.zeros(0, dtype=np.int64)
    pl_rate = np.concatenate(pl_rate) if pl_rate else np.zeros(0)

    esc_frac = total_escaped / max(total_accept, 1)
    from .mesh import mesh_hash

    return ReactionTables(
        n_voxels=mesh.n_nodes,
        pairs=out_pairs,
        kplus_pair=kplus,
        pl_start=pl_start,
        pl_voxel=pl_voxel,
        pl_rate=pl_rate,
        kernel=kernel,
        seed=seed,
        samples_per_pair=samples_per_pair,
        mesh_hash=mesh_hash(mesh),
        escaped_fraction=esc_frac,
    )


def tabulate_dissociation(tables, duals, potential_a, potential_b, potential_c, mode, kd=None, mu=None):
    """Fill dissociation rates k-_{ijk} and totals k-_k.

    detailed_balance: k-_{ijk} = Kd (Zc / (Za Zb)) (|Vi||Vj| / |Vk|)
    e^{phi_c_k - phi_a_i - phi_b_j} k+_{ijk}; the per-transition equilibrium
    flux identity then holds by construction. Voxels no association places
    into get rate 0.

    fixed_rate: k-_k = mu everywhere; the placement distribution over (i, j)
    follows the detailed-balance shape renormalized per voxel, with an
    unbind-in-place fallback for voxels without placement entries.
    """
    mesh = duals.mesh
    phi_a = values_at_nodes(potential_a, mesh)
    phi_b = values_at_nodes(potential_b, mesh)
    phi_c = values_at_nodes(potential_c, mesh)
    vols = duals.volumes
    log_v = np.log(vols)

    from .fields import log_partition

    lza = log_partition(duals, phi_a)
    lzb = log_partition(duals, phi_b)
    lzc = log_partition(duals, phi_c)

    N = tables.n_voxels
    entries = {k: [] for k in range(N)}
    for p in range(tables.n_pairs):
        i, j = tables.pairs[p]
        ks, rates = tables.placement_slice(p)
        for k, r in zip(ks, rates):
            entries[int(k)].append((int(i), int(j), float(r)))

    dis_start = np.zeros(N + 1, dtype=np.int64)
    dis_i, dis_j, dis_rate = [], [], []
    km_total = np.zeros(N)

    if mode == "detailed_balance":
        if kd is None or kd <= 0:
            raise ValueError("detailed_balance mode needs a positive dissociation constant")
        log_coef = np.log(kd) + lzc - lza - lzb
        for k in range(N):
            rr = sorted(entries[k])
            rates_k = []
            for i, j, r in rr:
                expo = log_coef + log_v[i] + log_v[j] - log_v[k] + phi_c[k] - phi_a[i] - phi_b[j]
                rates_k.append(np.exp(expo) * r)
                dis_i.append(i)
                dis_j.append(j)
            dis_rate.extend(rates_k)
            dis_start[k + 1] = dis_start[k] + len(rr)
            km_total[k] = np.sum(np.array(rates_k)) if rates_k else 0.0
        return replace(
            tables,
            km_total=km_total,
            dis_start=dis_start,
            dis_i=np.array(dis_i, dtype=np.int64),
            dis_j=np.array(dis_j, dtype=np.int64),
            dis_rate=np.array(dis_rate),
            dissociation_mode="detailed_balance",
            kd=float(kd),
        )

    if mode == "fixed_rate":
        if mu is None or mu <= 0:
            raise ValueError("fixed_rate mode needs a positive rate mu")
        for k in range(N):
            rr = sorted(entries[k])
            if rr:
                w = np.array(
                    [r * vols[i] * vols[j] * np.exp(-(phi_a[i] + phi_b[j])) for i, j, r in rr]
                )
                w = w / w.sum()
                for (i, j, _), wk in zip(rr, w):
                    dis_i.append(i)
                    dis_j.append(j)
                    dis_rate.append(mu * wk)
                dis_start[k + 1] = dis_start[k] + len(rr)
            else:
                # no association places into this voxel: unbind in place
                dis_i.append(k)
                dis_j.append(k)
                dis_rate.append(mu)
                dis_start[k + 1] = dis_start[k] + 1
            km_total[k] = mu
        return replace(
            tables,
            km_total=km_total,
            dis_start=dis_start,
            dis_i=np.array(dis_i, dtype=np.int64),
            dis_j=np.array(dis_j, dtype=np.int64),
            dis_rate=np.array(dis_rate),
            dissociation_mode="fixed_rate",
            mu=float(mu),
        )

    raise ValueError(f"unknown dissociation mode {mode!r}")


def continuous_unbind_rate(kernel, potential_a, potential_b, potential_c, za, zb, zc, kd, z, n_r=24, n_theta=48):
    """Pointwise dissociation rate of the continuous model at position z.

    k-(z) = Kd * lambda * (Zc / (Za Zb)) * e^{phi_c(z)} *
            integral over |w| <= radius of e^{-phi_a(x(w)) - phi_b(y(w))} dw
    with x = z + (1-gamma) w, y = z - gamma w (unit Jacobian).
    """
    z = np.asarray(z, dtype=float)
    w_pts, w_wts = ball_rule(kernel.radius, n_r=n_r, n_theta=n_theta)
    x = z[None, :] + (1.0 - kernel.gamma) * w_pts
    y = z[None, :] - kernel.gamma * w_pts
    integrand = np.exp(-(potential_a.values(x) + potential_b.values(y)))
    integral = float(np.dot(w_wts, integrand))
    phi_cz = float(potential_c.values(z[None, :])[0])
    return kd * kernel.rate * (zc / (za * zb)) * np.exp(phi_cz) * integral


def unbind_separation_sampler(kernel, potential_a, potential_b, domain_contains=None, n_probe=64):
    """Rejection sampler for the separation w of unbinding products.

    Draws w with density proportional to e^{-phi_a(z+(1-g)w) - phi_b(z-g w)}
    on the reaction ball; proposed product positions outside the domain are
    resampled. Returns sample(z, rng) -> (x, y).
    """
    probe, _ = ball_rule(kernel.radius, n_r=max(n_probe // 4, 4), n_theta=n_probe)

    def sample(z, rng, max_tries=100000):
        z = np.asarray(z, dtype=float)
        x_probe = z[None, :] + (1.0 - kernel.gamma) * probe
        y_probe = z[None, :] - kernel.gamma * probe
        log_f = -(potential_a.values(x_probe) + potential_b.values(y_probe))
        log_env = log_f.max() + np.log(1.2)
        for _ in range(max_tries):
            r = kernel.radius * np.sqrt(rng.random())
            th = 2 * np.pi * rng.random()
            w = np.array([r * np.cos(th), r * np.sin(th)])
            x = z + (1.0 - kernel.gamma) * w
            y = z - kernel.gamma * w
            lf = -(potential_a.values(x[None, :])[0] + potential_b.values(y[None, :])[0])
            if np.log(rng.random() + 1e-300) > lf - log_env:
                continue
            if domain_contains is not None and not (domain_contains(x) and domain_contains(y)):
                continue
            return x, y
        raise RuntimeError("separation sampler failed to produce an in-domain pair")

    return sample


def save_tables(tables, path):
    header = {
        "kind": "reaction_tables",
        "n_voxels": int(tables.n_voxels),
        "kernel": {
            "rate": tables.kernel.rate,
            "radius": tables.kernel.radius,
            "gamma": tables.kernel.gamma,
        },
        "seed": int(tables.seed),
        "samples_per_pair": int(tables.samples_per_pair),
        "mesh_hash": tables.mesh_hash,
        "escaped_fraction": tables.escaped_fraction,
        "dissociation_mode": tables.dissociation_mode,
        "kd": tables.kd,
        "mu": tables.mu,
        "n_kplus": int(len(tables.pl_voxel)),
        "n_kminus": int(len(tables.dis_i)) if tables.dis_i is not None else 0,
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for p in range(tables.n_pairs):
            i, j = tables.pairs[p]
            ks, rates = tables.placement_slice(p)
            for k, r in zip(ks, rates):
                fh.write(f"{i} {j} {k} {float(r)!r}\n")
        if tables.dis_i is not None:
            fh.write("KMINUS\n")
            for k in range(tables.n_voxels):
                ii, jj, rr = tables.dissociation_slice(k)
                for i, j, r in zip(ii, jj, rr):
                    fh.write(f"{i} {j} {k} {float(r)!r}\n")


def load_tables(path):
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "reaction_tables":
            raise ValueError(f"{path}: not a reaction table file")
        kp = []
        km = []
        target = kp
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line == "KMINUS":
                target = km
                continue
            i, j, k, r = line.split()
            target.append((int(i), int(j), int(k), float(r)))
    kernel = DoiKernel(**header["kernel"])
    n = header["n_voxels"]

    pair_entries = {}
    for i, j, k, r in kp:
        pair_entries.setdefault((i, j), []).append((k, r))
    keys = sorted(pair_entries)
    pairs = np.array(keys, dtype=np.int64).reshape(-1, 2) if keys else np.zeros((0, 2), dtype=np.int64)
    pl_start = np.zeros(len(keys) + 1, dtype=np.int64)
    pl_voxel, pl_rate = [], []
    kplus = np.zeros(len(keys))
    for p, key in enumerate(keys):
        ent = sorted(pair_entries[key])
        pl_voxel.extend(k for k, _ in ent)
        rates = np.array([r for _, r in ent])
        pl_rate.extend(rates)
        kplus[p] = np.sum(rates)
        pl_start[p + 1] = pl_start[p] + len(ent)

    tables = ReactionTables(
        n_voxels=n,
        pairs=pairs,
        kplus_pair=kplus,
        pl_start=pl_start,
        pl_voxel=np.array(pl_voxel, dtype=np.int64),
        pl_rate=np.array(pl_rate),
        kernel=kernel,
        seed=header["seed"],
        samples_per_pair=header["samples_per_pair"],
        mesh_hash=header.get("mesh_hash", ""),
        escaped_fraction=header.get("escaped_fraction", 0.0),
    )
    if km:
        vox_entries = {k: [] for k in range(n)}
        for i, j, k, r in km:
            vox_entries[k].append((i, j, r))
        dis_start = np.zeros(n + 1, dtype=np.int64)
        dis_i, dis_j, dis_rate = [], [], []
        km_total = np.zeros(n)
        for k in range(n):
            ent = sorted(vox_entries[k])
            for i, j, r in ent:
                dis_i.append(i)
                dis_j.append(j)
                dis_rate.append(r)
            dis_start[k + 1] = dis_start[k] + len(ent)
            km_total[k] = np.sum(np.array([r for _, _, r in ent])) if ent else 0.0
        mode = header.get("dissociation_mode", "")
        if mode == "fixed_rate":
            km_total[:] = header.get("mu", 0.0)
        tables = replace(
            tables,
            km_total=km_total,
            dis_start=dis_start,
            dis_i=np.array(dis_i, dtype=np.int64),
            dis_j=np.array(dis_j, dtype=np.int64),
            dis_rate=np.array(dis_rate),
            dissociation_mode=mode,
            kd=header.get("kd", 0.0),
            mu=header.get("mu", 0.0),
        )
    return tables
