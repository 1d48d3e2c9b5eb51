"""Conforming 2D triangulations and their barycentric dual cells.

Dual cells are the jump-process voxels: the cell around node i is bounded by
edge midpoints and triangle barycenters, and its area equals the lumped-mass
value sum(|T|/3) over incident triangles.
"""

import hashlib

import numpy as np
from numba import njit

__all__ = [
    "Mesh",
    "DualCells",
    "MeshError",
    "load_mesh",
    "save_mesh",
    "generate_mesh",
    "refine_uniform",
    "dual_cells",
    "is_delaunay",
    "euler_characteristic",
    "mesh_hash",
    "TriangleLocator",
]


class MeshError(Exception):
    """Raised for parse failures and non-conforming meshes."""


def _cross2(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _signed_areas(nodes, triangles):
    p0 = nodes[triangles[:, 0]]
    p1 = nodes[triangles[:, 1]]
    p2 = nodes[triangles[:, 2]]
    return 0.5 * _cross2(p1 - p0, p2 - p0)


class Mesh:
    """Triangulation with deduplicated edge topology.

    Attributes
    ----------
    nodes : (N, 2) float array, coordinates in micrometers
    triangles : (T, 3) int array, counter-clockwise node triples
    edges : (E, 2) int array, node pairs with edges[:, 0] < edges[:, 1]
    edge_tris : (E, 2) int array, incident triangles (-1 if boundary)
    boundary_edges : (B, 2) int array
    tri_areas : (T,) float array
    """

    def __init__(self, nodes, triangles):
        nodes = np.ascontiguousarray(np.asarray(nodes, dtype=np.float64))
        triangles = np.ascontiguousarray(np.asarray(triangles, dtype=np.int64))
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise MeshError("nodes must be an (N, 2) array")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError("triangles must be a (T, 3) array")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(nodes)):
            raise MeshError("triangle index out of range")

        # normalize orientation to counter-clockwise
        sa = _signed_areas(nodes, triangles)
        flip = sa < 0
        if np.any(flip):
            triangles = triangles.copy()
            triangles[flip] = triangles[flip][:, [0, 2, 1]]
            sa = np.abs(sa)
        bad = np.nonzero(sa <= 0)[0]
        if bad.size:
            raise MeshError(f"degenerate triangle(s) with zero area: {bad.tolist()[:10]}")

        self.nodes = nodes
        self.triangles = triangles
        self.tri_areas = sa
        self._build_topology()

    def _build_topology(self):
        tris = self.triangles
        raw = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        raw_sorted = np.sort(raw, axis=1)
        owner = np.tile(np.arange(len(tris)), 3)
        edges, inv, counts = np.unique(
            raw_sorted, axis=0, return_inverse=True, return_counts=True
        )
        over = np.nonzero(counts > 2)[0]
        if over.size:
            a, b = edges[over[0]]
            raise MeshError(f"non-conforming mesh: edge ({a}, {b}) shared by {counts[over[0]]} triangles")
        edge_tris = np.full((len(edges), 2), -1, dtype=np.int64)
        order = np.argsort(inv, kind="stable")
        sorted_inv = inv[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_inv[1:] != sorted_inv[:-1]
        edge_tris[sorted_inv[first], 0] = owner[order[first]]
        edge_tris[sorted_inv[~first], 1] = owner[order[~first]]

        used = np.zeros(len(self.nodes), dtype=bool)
        used[tris.ravel()] = True
        orphans = np.nonzero(~used)[0]
        if orphans.size:
            raise MeshError(f"orphan node(s) not referenced by any triangle: {orphans.tolist()[:10]}")

        self.edges = edges
        self.edge_tris = edge_tris
        self.tri_of_edge = inv.reshape(3, len(tris)).T  # triangle -> its 3 edge ids
        boundary = edge_tris[:, 1] == -1
        self.boundary_edges = edges[boundary]
        self.is_boundary_node = np.zeros(len(self.nodes), dtype=bool)
        self.is_boundary_node[self.boundary_edges.ravel()] = True

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def edge_lengths(self):
        d = self.nodes[self.edges[:, 1]] - self.nodes[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def max_edge_length(self):
        return float(self.edge_lengths().max())

    def total_area(self):
        return float(self.tri_areas.sum())


class DualCells:
    """Barycentric dual cells of a mesh.

    volumes[i] is the cell area sum(|T|/3) over triangles containing node i.
    The fan decomposition stores, per node, the sub-triangles
    (node, edge midpoint, barycenter) covering the dual polygon exactly; it is
    used for uniform sampling inside a cell.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        N = mesh.n_nodes
        tris = mesh.triangles
        areas = mesh.tri_areas

        self.volumes = np.zeros(N)
        np.add.at(self.volumes, tris[:, 0], areas / 3)
        np.add.at(self.volumes, tris[:, 1], areas / 3)
        np.add.at(self.volumes, tris[:, 2], areas / 3)

        # fan decomposition: two sub-triangles per (node, incident triangle)
        counts = np.zeros(N, dtype=np.int64)
        np.add.at(counts, tris.ravel(), 1)
        self.fan_start = np.zeros(N + 1, dtype=np.int64)
        np.cumsum(2 * counts, out=self.fan_start[1:])
        n_sub = self.fan_start[-1]
        self.fan_pts = np.zeros((n_sub, 3, 2))
        nodes = mesh.nodes
        bary = (nodes[tris[:, 0]] + nodes[tris[:, 1]] + nodes[tris[:, 2]]) / 3.0

        owner_all = np.concatenate([tris[:, 0], tris[:, 1], tris[:, 2]])
        p_all = nodes[owner_all]
        nxt_all = np.vstack([nodes[tris[:, 1]], nodes[tris[:, 2]], nodes[tris[:, 0]]])
        prv_all = np.vstack([nodes[tris[:, 2]], nodes[tris[:, 0]], nodes[tris[:, 1]]])
        bary_all = np.vstack([bary, bary, bary])
        order = np.argsort(owner_all, kind="stable")
        inc_start = np.zeros(N + 1, dtype=np.int64)
        np.cumsum(counts, out=inc_start[1:])
        rank = np.arange(len(owner_all)) - inc_start[owner_all[order]]
        slot = self.fan_start[owner_all[order]] + 2 * rank
        self.fan_pts[slot, 0] = p_all[order]
        self.fan_pts[slot, 1] = 0.5 * (p_all[order] + nxt_all[order])
        self.fan_pts[slot, 2] = bary_all[order]
        self.fan_pts[slot + 1, 0] = p_all[order]
        self.fan_pts[slot + 1, 1] = bary_all[order]
        self.fan_pts[slot + 1, 2] = 0.5 * (p_all[order] + prv_all[order])

        a = self.fan_pts[:, 0]
        b = self.fan_pts[:, 1]
        c = self.fan_pts[:, 2]
        self.fan_areas = np.abs(0.5 * _cross2(b - a, c - a))
        fan_owner = np.repeat(np.arange(N), 2 * counts)
        self.fan_owner = fan_owner

        self.centroids = nodes
        # conservative per-cell reach used for pair pruning
        reach = np.zeros(N)
        for k in (1, 2):
            d = np.hypot(
                self.fan_pts[:, k, 0] - nodes[fan_owner, 0],
                self.fan_pts[:, k, 1] - nodes[fan_owner, 1],
            )
            np.maximum.at(reach, fan_owner, d)
        self.reach = reach

    def total_volume(self):
        return float(self.volumes.sum())

    def sample_points(self, node, u):
        """Map uniforms u (m, 3) to points uniform in the dual cell of `node`."""
        s, e = self.fan_start[node], self.fan_start[node + 1]
        areas = self.fan_areas[s:e]
        cdf = np.cumsum(areas)
        cdf /= cdf[-1]
        idx = s + np.searchsorted(cdf, u[:, 0], side="right").clip(0, e - s - 1)
        r = np.sqrt(u[:, 1])
        a = self.fan_pts[idx, 0]
        b = self.fan_pts[idx, 1]
        c = self.fan_pts[idx, 2]
        return (1 - r)[:, None] * a + (r * (1 - u[:, 2]))[:, None] * b + (r * u[:, 2])[:, None] * c


def dual_cells(mesh):
    return DualCells(mesh)


def load_mesh(path):
    """Read the plain-text node/element format.

    Line 1: "N_nodes N_triangles"; then N_nodes lines "x y"; then
    N_triangles lines "i j k" (0-based).
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MeshError(f"{path}: empty file")

    def fail(lineno, msg):
        raise MeshError(f"{path}:{lineno}: {msg}")

    head = lines[0].split()
    if len(head) != 2:
        fail(1, "expected 'N_nodes N_triangles'")
    try:
        n_nodes, n_tris = int(head[0]), int(head[1])
    except ValueError:
        fail(1, "counts must be integers")
    if len(lines) < 1 + n_nodes + n_tris:
        fail(len(lines), f"expected {1 + n_nodes + n_tris} lines, found {len(lines)}")
    nodes = np.zeros((n_nodes, 2))
    for i in range(n_nodes):
        parts = lines[1 + i].split()
        if len(parts) != 2:
            fail(2 + i, "expected 'x y'")
        try:
            nodes[i] = [float(parts[0]), float(parts[1])]
        except ValueError:
            fail(2 + i, f"bad coordinate {parts!r}")
    tris = np.zeros((n_tris, 3), dtype=np.int64)
    for t in range(n_tris):
        lineno = 1 + n_nodes + t
        parts = lines[lineno].split()
        if len(parts) != 3:
            fail(lineno + 1, "expected 'i j k'")
        try:
            tris[t] = [int(p) for p in parts]
        except ValueError:
            fail(lineno + 1, f"bad index {parts!r}")
        if tris[t].min() < 0 or tris[t].max() >= n_nodes:
            fail(lineno + 1, f"node index out of range in {parts!r}")
    return Mesh(nodes, tris)


def save_mesh(mesh, path):
    with open(path, "w") as fh:
        fh.write(f"{mesh.n_nodes} {mesh.n_triangles}\n")
        for x, y in mesh.nodes:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")


def _refine_arrays(nodes, triangles):
    """Midpoint subdivision; original nodes keep their indices."""
    tris = triangles
    raw = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    raw_sorted = np.sort(raw, axis=1)
    edges, inv = np.unique(raw_sorted, axis=0, return_inverse=True)
    mids = 0.5 * (nodes[edges[:, 0]] + nodes[edges[:, 1]])
    new_nodes = np.vstack([nodes, mids])
    n0 = len(nodes)
    m01 = n0 + inv[: len(tris)]
    m12 = n0 + inv[len(tris): 2 * len(tris)]
    m20 = n0 + inv[2 * len(tris):]
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    children = np.empty((4 * len(tris), 3), dtype=np.int64)
    children[0::4] = np.column_stack([a, m01, m20])
    children[1::4] = np.column_stack([b, m12, m01])
    children[2::4] = np.column_stack([c, m20, m12])
    children[3::4] = np.column_stack([m01, m12, m20])
    return new_nodes, children


def refine_uniform(mesh):
    """Replace each triangle by 4 congruent children via edge midpoints."""
    nodes, tris = _refine_arrays(mesh.nodes, mesh.triangles)
    return Mesh(nodes, tris)


def _square_template(center, side):
    cx, cy = center
    h = side / 2.0
    nodes = np.array(
        [
            [cx - h, cy - h],
            [cx + h, cy - h],
            [cx + h, cy + h],
            [cx - h, cy + h],
            [cx, cy],
        ]
    )
    tris = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
    return nodes, tris


def _disk_template(center, radius):
    cx, cy = center
    theta = np.pi / 3 * np.arange(6)
    ring = np.column_stack([cx + radius * np.cos(theta), cy + radius * np.sin(theta)])
    nodes = np.vstack([[cx, cy], ring])
    tris = np.array([[0, 1 + i, 1 + (i + 1) % 6] for i in range(6)])
    return nodes, tris


def generate_mesh(shape, level, center=None, size=None):
    """Generate a structured mesh of a square or disk.

    shape is "square" (center, side=size) or "disk" (center, radius=size).
    Level k carries 4**k times the template triangle count; disk boundary
    nodes are projected onto the circle after every refinement.
    """
    if size is None or size <= 0:
        raise ValueError("size must be positive")
    if center is None:
        center = (0.0, 0.0)
    if shape == "square":
        nodes, tris = _square_template(center, size)
        project = None
    elif shape == "disk":
        nodes, tris = _disk_template(center, size)

        def project(nodes, boundary_mask):
            v = nodes[boundary_mask] - np.asarray(center)
            r = np.hypot(v[:, 0], v[:, 1])
            nodes[boundary_mask] = np.asarray(center) + size * v / r[:, None]
            return nodes
    else:
        raise ValueError(f"unknown shape {shape!r}")

    mesh = Mesh(nodes, tris)
    for _ in range(level):
        nodes, tris = _refine_arrays(mesh.nodes, mesh.triangles)
        mesh = Mesh(nodes, tris)
        if project is not None:
            nodes = mesh.nodes.copy()
            nodes = project(nodes, mesh.is_boundary_node)
            mesh = Mesh(nodes, mesh.triangles)
    return mesh


def euler_characteristic(mesh):
    """V - E + F; equals 1 for a simply-connected triangulated region."""
    return mesh.n_nodes - len(mesh.edges) + mesh.n_triangles


def _opposite_angles(mesh, edge_id):
    """Angles opposite to an interior edge in its two incident triangles."""
    a, b = mesh.edges[edge_id]
    angles = []
    for t in mesh.edge_tris[edge_id]:
        if t < 0:
            continue
        tri = mesh.triangles[t]
        opp = [v for v in tri if v != a and v != b][0]
        pa = mesh.nodes[a] - mesh.nodes[opp]
        pb = mesh.nodes[b] - mesh.nodes[opp]
        cosang = np.dot(pa, pb) / (np.linalg.norm(pa) * np.linalg.norm(pb))
        angles.append(float(np.arccos(np.clip(cosang, -1.0, 1.0))))
    return angles


def is_delaunay(mesh, tol=1e-10):
    """Empty-circumcircle test per interior edge via the opposite-angle sum."""
    bad = []
    interior = np.nonzero(mesh.edge_tris[:, 1] >= 0)[0]
    for e in interior:
        angles = _opposite_angles(mesh, e)
        if sum(angles) > np.pi + tol:
            bad.append(tuple(int(v) for v in mesh.edges[e]))
    return len(bad) == 0, bad


def mesh_hash(mesh):
    h = hashlib.sha256()
    h.update(mesh.nodes.tobytes())
    h.update(mesh.triangles.tobytes())
    return h.hexdigest()


@njit(cache=True)
def _locate_kernel(pts, nodes, tris, grid_start, grid_items, nx, ny, x0, y0, dx, dy, tol):
    n = pts.shape[0]
    out_tri = np.full(n, -1, dtype=np.int64)
    out_node = np.full(n, -1, dtype=np.int64)
    for m in range(n):
        px, py = pts[m, 0], pts[m, 1]
        cx = int((px - x0) / dx)
        cy = int((py - y0) / dy)
        # clamp so points on the upper bbox edge still scan candidates;
        # membership is decided by the barycentric test below
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
            if l1 >= -tol and l2 >= -tol and l3 >= -tol:
                out_tri[m] = t
                if l1 >= l2 and l1 >= l3:
                    out_node[m] = i0
                elif l2 >= l3:
                    out_node[m] = i1
                else:
                    out_node[m] = i2
                break
    return out_tri, out_node


class TriangleLocator:
    """Uniform-grid point location; maps points to triangles and dual cells."""

    def __init__(self, mesh, cells_per_axis=None):
        self.mesh = mesh
        nodes, tris = mesh.nodes, mesh.triangles
        lo = nodes.min(axis=0)
        hi = nodes.max(axis=0)
        span = np.maximum(hi - lo, 1e-300)
        if cells_per_axis is None:
            cells_per_axis = max(1, int(np.sqrt(len(tris))))
        nx = ny = cells_per_axis
        dx, dy = span[0] / nx, span[1] / ny
        # bin triangles into all grid cells overlapped by their bbox
        tmin = np.minimum(np.minimum(nodes[tris[:, 0]], nodes[tris[:, 1]]), nodes[tris[:, 2]])
        tmax = np.maximum(np.maximum(nodes[tris[:, 0]], nodes[tris[:, 1]]), nodes[tris[:, 2]])
        cx0 = np.clip(((tmin[:, 0] - lo[0]) / dx).astype(np.int64), 0, nx - 1)
        cx1 = np.clip(((tmax[:, 0] - lo[0]) / dx).astype(np.int64), 0, nx - 1)
        cy0 = np.clip(((tmin[:, 1] - lo[1]) / dy).astype(np.int64), 0, ny - 1)
        cy1 = np.clip(((tmax[:, 1] - lo[1]) / dy).astype(np.int64), 0, ny - 1)
        buckets = [[] for _ in range(nx * ny)]
        for t in range(len(tris)):
            for gx in range(cx0[t], cx1[t] + 1):
                for gy in range(cy0[t], cy1[t] + 1):
                    buckets[gx * ny + gy].append(t)
        start = np.zeros(nx * ny + 1, dtype=np.int64)
        for c, b in enumerate(buckets):
            start[c + 1] = start[c] + len(b)
        items = np.zeros(start[-1], dtype=np.int64)
        for c, b in enumerate(buckets):
            items[start[c]: start[c + 1]] = b
        self.grid_start = start
        self.grid_items = items
        self.nx, self.ny = nx, ny
        self.x0, self.y0 = float(lo[0]), float(lo[1])
        self.dx, self.dy = float(dx), float(dy)

    def locate(self, pts, tol=1e-12):
        """Return (triangle ids, dual cell node ids); -1 where outside."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        return _locate_kernel(
            pts, self.mesh.nodes, self.mesh.triangles,
            self.grid_start, self.grid_items,
            self.nx, self.ny, self.x0, self.y0, self.dx, self.dy, tol,
        )

    def kernel_args(self):
        """Arrays consumed by numba kernels that locate points inline."""
        return (
            self.mesh.nodes, self.mesh.triangles,
            self.grid_start, self.grid_items,
            self.nx, self.ny, self.x0, self.y0, self.dx, self.dy,
        )
