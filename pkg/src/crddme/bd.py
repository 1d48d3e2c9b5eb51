"""Brownian dynamics reference simulator.

Time-discretized drift-diffusion with specular boundary reflection, a Doi
pair reaction tested per step with exact constant-exposure probabilities
1 - e^{-rate dt}, and unbinding by exact thinning against a precomputed
rate bound. Position updates per free particle and step:
x <- x - D grad(phi) dt + sqrt(2 D dt) xi.

Ensembles use the same per-realization stream derivation as the jump
process simulator and merge deterministically by realization index.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .fields import potential_code
from .quadrature import ball_rule, gauss_legendre_01
from .ssa import stream_seeds

__all__ = ["BDConfig", "BDSpecies", "bd_simulate", "domain_partition_function"]

DOMAIN_SQUARE = 0
DOMAIN_DISK = 1

REGION_ALL = 0
REGION_OUTSIDE = 1
REGION_INSIDE = 2
REGION_CENTER = 3

_PAIR_CAP = 65536


@dataclass
class BDSpecies:
    name: str
    diffusivity: float
    potential: object
    init_count: int = 0
    region: tuple = (REGION_ALL, 0.0)  # (kind, radius about the domain center)


@dataclass
class BDConfig:
    """Scenario for the time-discretized reference simulator.

    domain: ("square", center, side) or ("disk", center, radius).
    species: up to three BDSpecies; a kernel couples species[0] + species[1]
    -> species[2]. dissociation: ("detailed_balance", kd) or
    ("fixed_rate", mu). annihilation drops the product species.
    """

    domain: tuple
    species: list
    dt: float = 1e-10
    kernel: object = None
    dissociation: tuple = None
    annihilation: bool = False
    linear: list = field(default_factory=list)  # (src_name, dst_name, rate)
    max_reflections: int = 64

    def domain_code(self):
        kind, center, size = self.domain
        code = DOMAIN_SQUARE if kind == "square" else DOMAIN_DISK
        if kind not in ("square", "disk"):
            raise ValueError(f"unknown domain kind {kind!r}")
        return code, float(center[0]), float(center[1]), float(size)

    def validate(self):
        code, cx, cy, size = self.domain_code()
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        span = size if code == DOMAIN_SQUARE else 2 * size
        for s in self.species:
            # crude drift-step sanity bound on a domain-corner probe grid
            probe = np.array([[cx + span, cy + span], [cx - span, cy], [cx, cy - span]])
            g = s.potential.gradients(probe)
            step = s.diffusivity * np.abs(g).max() * self.dt
            if step >= span:
                raise ValueError(
                    f"drift step {step:.3g} for species {s.name} exceeds the domain size"
                )


def domain_partition_function(domain, potential, n=96):
    """Integral of e^{-phi} over a square or disk domain (meshfree)."""
    kind, center, size = domain
    if kind == "square":
        x, w = gauss_legendre_01(n)
        lo = np.array(center) - size / 2
        X, Y = np.meshgrid(lo[0] + size * x, lo[1] + size * x, indexing="ij")
        W = np.outer(w, w) * size**2
        pts = np.column_stack([X.ravel(), Y.ravel()])
        return float(np.dot(W.ravel(), np.exp(-potential.values(pts))))
    if kind == "disk":
        pts, w = ball_rule(size, n_r=n, n_theta=2 * n)
        pts = pts + np.asarray(center)
        return float(np.dot(w, np.exp(-potential.values(pts))))
    raise ValueError(f"unknown domain kind {kind!r}")


@njit(cache=True, inline="always")
def _pot_value(kind, p, x, y):
    if kind == 0:
        return p[0]
    if kind == 1:
        return p[0] * (x * x + y * y)
    if kind == 2:
        t = 1.0 - x * x
        return 2.5 * t * t + 5.0 * y * y
    r = math.hypot(x, y)
    if r <= p[1]:
        return p[0] * r
    return 2.0 * p[0] * (r - p[1]) + p[0] * p[1]


@njit(cache=True, inline="always")
def _pot_grad(kind, p, x, y):
    if kind == 0:
        return 0.0, 0.0
    if kind == 1:
        return 2.0 * p[0] * x, 2.0 * p[0] * y
    if kind == 2:
        return -10.0 * x * (1.0 - x * x), 10.0 * y
    r = math.hypot(x, y)
    if r == 0.0:
        return 0.0, 0.0
    slope = p[0] if r <= p[1] else 2.0 * p[0]
    return slope * x / r, slope * y / r


@njit(cache=True, inline="always")
def _inside(code, cx, cy, size, x, y):
    if code == 0:
        h = size / 2.0
        return (cx - h) <= x <= (cx + h) and (cy - h) <= y <= (cy + h)
    dx = x - cx
    dy = y - cy
    return dx * dx + dy * dy <= size * size


@njit(cache=True, inline="always")
def _reflect(code, cx, cy, size, x, y, max_iter):
    """Specular fold back into the domain; returns (x, y, ok)."""
    if code == 0:
        h = size / 2.0
        lox, hix = cx - h, cx + h
        loy, hiy = cy - h, cy + h
        for _ in range(max_iter):
            moved = False
            if x < lox:
                x = 2.0 * lox - x
                moved = True
            elif x > hix:
                x = 2.0 * hix - x
                moved = True
            if y < loy:
                y = 2.0 * loy - y
                moved = True
            elif y > hiy:
                y = 2.0 * hiy - y
                moved = True
            if not moved:
                return x, y, True
        return x, y, False
    for _ in range(max_iter):
        dx = x - cx
        dy = y - cy
        r = math.hypot(dx, dy)
        if r <= size:
            return x, y, True
        # radial fold across the circle; |2R - r| can need further folds
        rr = abs(2.0 * size - r)
        x = cx + rr * dx / r
        y = cy + rr * dy / r
    return x, y, False


@njit(cache=True, inline="always")
def _sample_region(code, cx, cy, size, rkind, rrad):
    if rkind == 3:
        return cx, cy
    for _ in range(100000):
        if code == 0:
            x = cx + size * (np.random.random() - 0.5)
            y = cy + size * (np.random.random() - 0.5)
        else:
            r = size * math.sqrt(np.random.random())
            th = 2.0 * math.pi * np.random.random()
            x = cx + r * math.cos(th)
            y = cy + r * math.sin(th)
        rc = math.hypot(x - cx, y - cy)
        if rkind == 1 and rc <= rrad:
            continue
        if rkind == 2 and rc > rrad:
            continue
        return x, y
    return cx, cy


@njit(cache=True, inline="always")
def _unbind_rate_at(zx, zy, coef, qpts, qw, gamma, ka, pa, kb, pb, kc, pc):
    acc = 0.0
    for m in range(qpts.shape[0]):
        wx, wy = qpts[m, 0], qpts[m, 1]
        xa = zx + (1.0 - gamma) * wx
        ya = zy + (1.0 - gamma) * wy
        xb = zx - gamma * wx
        yb = zy - gamma * wy
        acc += qw[m] * math.exp(-_pot_value(ka, pa, xa, ya) - _pot_value(kb, pb, xb, yb))
    return coef * math.exp(_pot_value(kc, pc, zx, zy)) * acc


@njit(cache=True)
def _bd_core(
    seed,
    code, cx, cy, size, max_reflect,
    dt, n_steps,
    n_species, d_arr, pot_kind, pot_params,
    init_counts, region_kind, region_rad,
    has_pair, annihilate, rb, lam, gamma,
    unbind_mode, mu, db_coef, kmax, qpts, qw,
    lin_src, lin_dst, lin_prob,
    cell_size, grid_nx, grid_ny,
    t_grid, out_totals,
    track_msd, out_track,
    stop_first_bind,
    pos_buf, n_buf,
    head, nxt, touched,
    pair_a, pair_b,
    out_final_n, out_final_pos,
):
    """One BD realization. Returns (status, first_bind_time).

    status: 0 ok, 1 reflection failure, 2 pair buffer overflow,
    3 product placement failure, 4 envelope violation.
    """
    np.random.seed(seed)
    G = len(t_grid)
    sa, sb, sc = 0, 1, 2

    for s in range(n_species):
        n_buf[s] = init_counts[s]
        for m in range(init_counts[s]):
            x, y = _sample_region(code, cx, cy, size, region_kind[s], region_rad[s])
            pos_buf[s, m, 0] = x
            pos_buf[s, m, 1] = y

    p_bind = -math.expm1(-lam * dt) if has_pair else 0.0
    p_cand = -math.expm1(-kmax * dt) if unbind_mode == 1 else 0.0
    p_mu = -math.expm1(-mu * dt) if unbind_mode == 2 else 0.0
    denom_cand = p_cand if p_cand > 0.0 else 1.0

    first_bind = np.nan
    g = 0
    status = 0
    env_margin = 1.3

    for step in range(n_steps):
        t_now = step * dt
        while g < G and t_grid[g] <= t_now:
            for s in range(n_species):
                out_totals[s, g] = n_buf[s]
            if track_msd and n_buf[0] > 0:
                out_track[g, 0] = pos_buf[0, 0, 0]
                out_track[g, 1] = pos_buf[0, 0, 1]
            g += 1

        # drift-diffusion update with reflecting boundaries
        for s in range(n_species):
            d = d_arr[s]
            sd = math.sqrt(2.0 * d * dt)
            for m in range(n_buf[s]):
                x = pos_buf[s, m, 0]
                y = pos_buf[s, m, 1]
                gx, gy = _pot_grad(pot_kind[s], pot_params[s], x, y)
                x += -d * gx * dt + sd * np.random.standard_normal()
                y += -d * gy * dt + sd * np.random.standard_normal()
                x, y, ok = _reflect(code, cx, cy, size, x, y, max_reflect)
                if not ok:
                    return 1, first_bind
                pos_buf[s, m, 0] = x
                pos_buf[s, m, 1] = y

        # first-order conversions, decided on start-of-step membership
        for li in range(len(lin_src)):
            src = lin_src[li]
            dst = lin_dst[li]
            m = 0
            n_start = n_buf[src]
            scanned = 0
            while m < n_buf[src] and scanned < n_start:
                scanned += 1
                if np.random.random() < lin_prob[li]:
                    pos_buf[dst, n_buf[dst], 0] = pos_buf[src, m, 0]
                    pos_buf[dst, n_buf[dst], 1] = pos_buf[src, m, 1]
                    n_buf[dst] += 1
                    n_buf[src] -= 1
                    pos_buf[src, m, 0] = pos_buf[src, n_buf[src], 0]
                    pos_buf[src, m, 1] = pos_buf[src, n_buf[src], 1]
                else:
                    m += 1

        if has_pair and not annihilate:
            # unbinding by thinning against the global rate bound
            m = 0
            while m < n_buf[sc]:
                zx = pos_buf[sc, m, 0]
                zy = pos_buf[sc, m, 1]
                fire = False
                if unbind_mode == 2:
                    fire = np.random.random() < p_mu
                elif unbind_mode == 1 and np.random.random() < p_cand:
                    kr = _unbind_rate_at(
                        zx, zy, db_coef, qpts, qw, gamma,
                        pot_kind[sa], pot_params[sa],
                        pot_kind[sb], pot_params[sb],
                        pot_kind[sc], pot_params[sc],
                    )
                    if kr > kmax:
                        status = 4
                    ratio = -math.expm1(-kr * dt) / denom_cand
                    fire = np.random.random() < ratio
                if fire:
                    # envelope for the separation density from the quad grid
                    fmax = 0.0
                    for q in range(qpts.shape[0]):
                        xa = zx + (1.0 - gamma) * qpts[q, 0]
                        ya = zy + (1.0 - gamma) * qpts[q, 1]
                        xb = zx - gamma * qpts[q, 0]
                        yb = zy - gamma * qpts[q, 1]
                        f = math.exp(
                            -_pot_value(pot_kind[sa], pot_params[sa], xa, ya)
                            - _pot_value(pot_kind[sb], pot_params[sb], xb, yb)
                        )
                        if f > fmax:
                            fmax = f
                    log_env = math.log(fmax * env_margin)
                    placed = False
                    drawn = False
                    xa = zx
                    ya = zy
                    xb = zx
                    yb = zy
                    for _ in range(10000):
                        r = rb * math.sqrt(np.random.random())
                        th = 2.0 * math.pi * np.random.random()
                        wx = r * math.cos(th)
                        wy = r * math.sin(th)
                        xa = zx + (1.0 - gamma) * wx
                        ya = zy + (1.0 - gamma) * wy
                        xb = zx - gamma * wx
                        yb = zy - gamma * wy
                        lf = (
                            -_pot_value(pot_kind[sa], pot_params[sa], xa, ya)
                            - _pot_value(pot_kind[sb], pot_params[sb], xb, yb)
                        )
                        if math.log(np.random.random() + 1e-300) > lf - log_env:
                            continue
                        drawn = True
                        if not _inside(code, cx, cy, size, xa, ya):
                            continue
                        if not _inside(code, cx, cy, size, xb, yb):
                            continue
                        placed = True
                        break
                    if not drawn:
                        return 3, first_bind
                    if not placed:
                        # complex pinned at the boundary: both separations
                        # straddle it, so fold products inside like any
                        # other boundary crossing
                        xa, ya, ok_a = _reflect(code, cx, cy, size, xa, ya, max_reflect)
                        xb, yb, ok_b = _reflect(code, cx, cy, size, xb, yb, max_reflect)
                        if not (ok_a and ok_b):
                            return 3, first_bind
                    pos_buf[sa, n_buf[sa], 0] = xa
                    pos_buf[sa, n_buf[sa], 1] = ya
                    n_buf[sa] += 1
                    pos_buf[sb, n_buf[sb], 0] = xb
                    pos_buf[sb, n_buf[sb], 1] = yb
                    n_buf[sb] += 1
                    n_buf[sc] -= 1
                    pos_buf[sc, m, 0] = pos_buf[sc, n_buf[sc], 0]
                    pos_buf[sc, m, 1] = pos_buf[sc, n_buf[sc], 1]
                else:
                    m += 1

        if has_pair:
            # broad phase: hash B particles on a cell grid of size >= rb
            n_pairs = 0
            nb = n_buf[sb]
            n_touch = 0
            for m in range(nb):
                gx = int((pos_buf[sb, m, 0] - (cx - size)) / cell_size)
                gy = int((pos_buf[sb, m, 1] - (cy - size)) / cell_size)
                gx = min(max(gx, 0), grid_nx - 1)
                gy = min(max(gy, 0), grid_ny - 1)
                cell = gx * grid_ny + gy
                if head[cell] == -1:
                    touched[n_touch] = cell
                    n_touch += 1
                nxt[m] = head[cell]
                head[cell] = m
            rb2 = rb * rb
            for m in range(n_buf[sa]):
                ax = pos_buf[sa, m, 0]
                ay = pos_buf[sa, m, 1]
                gx = int((ax - (cx - size)) / cell_size)
                gy = int((ay - (cy - size)) / cell_size)
                for ox in range(-1, 2):
                    ggx = gx + ox
                    if ggx < 0 or ggx >= grid_nx:
                        continue
                    for oy in range(-1, 2):
                        ggy = gy + oy
                        if ggy < 0 or ggy >= grid_ny:
                            continue
                        idx = head[ggx * grid_ny + ggy]
                        while idx != -1:
                            dx = ax - pos_buf[sb, idx, 0]
                            dy = ay - pos_buf[sb, idx, 1]
                            if dx * dx + dy * dy <= rb2:
                                if n_pairs >= _PAIR_CAP:
                                    return 2, first_bind
                                pair_a[n_pairs] = m
                                pair_b[n_pairs] = idx
                                n_pairs += 1
                            idx = nxt[idx]
            for tix in range(n_touch):
                head[touched[tix]] = -1
            # random processing order; each particle consumed at most once
            for p in range(n_pairs - 1, 0, -1):
                q = int(np.random.random() * (p + 1))
                if q > p:
                    q = p
                pair_a[p], pair_a[q] = pair_a[q], pair_a[p]
                pair_b[p], pair_b[q] = pair_b[q], pair_b[p]
            if n_pairs > 0:
                consumed_a = np.zeros(n_buf[sa], dtype=np.bool_)
                consumed_b = np.zeros(n_buf[sb], dtype=np.bool_)
                removals_a = 0
                for p in range(n_pairs):
                    ia = pair_a[p]
                    ib = pair_b[p]
                    if consumed_a[ia] or consumed_b[ib]:
                        continue
                    if np.random.random() >= p_bind:
                        continue
                    consumed_a[ia] = True
                    consumed_b[ib] = True
                    if np.isnan(first_bind):
                        first_bind = t_now + dt
                    if not annihilate:
                        zx = gamma * pos_buf[sa, ia, 0] + (1.0 - gamma) * pos_buf[sb, ib, 0]
                        zy = gamma * pos_buf[sa, ia, 1] + (1.0 - gamma) * pos_buf[sb, ib, 1]
                        pos_buf[sc, n_buf[sc], 0] = zx
                        pos_buf[sc, n_buf[sc], 1] = zy
                        n_buf[sc] += 1
                # compact consumed particles (descending index keeps swaps valid)
                for m in range(n_buf[sa] - 1, -1, -1):
                    if consumed_a[m]:
                        n_buf[sa] -= 1
                        pos_buf[sa, m, 0] = pos_buf[sa, n_buf[sa], 0]
                        pos_buf[sa, m, 1] = pos_buf[sa, n_buf[sa], 1]
                for m in range(n_buf[sb] - 1, -1, -1):
                    if consumed_b[m]:
                        n_buf[sb] -= 1
                        pos_buf[sb, m, 0] = pos_buf[sb, n_buf[sb], 0]
                        pos_buf[sb, m, 1] = pos_buf[sb, n_buf[sb], 1]
                if stop_first_bind and not np.isnan(first_bind):
                    break

    t_final = n_steps * dt
    while g < G and t_grid[g] <= t_final + 1e-12 * max(t_final, 1.0):
        for s in range(n_species):
            out_totals[s, g] = n_buf[s]
        if track_msd and n_buf[0] > 0:
            out_track[g, 0] = pos_buf[0, 0, 0]
            out_track[g, 1] = pos_buf[0, 0, 1]
        g += 1
    for s in range(n_species):
        out_final_n[s] = n_buf[s]
        for m in range(n_buf[s]):
            out_final_pos[s, m, 0] = pos_buf[s, m, 0]
            out_final_pos[s, m, 1] = pos_buf[s, m, 1]
    return status, first_bind


@njit(cache=True, parallel=True)
def _bd_ensemble(
    seeds,
    code, cx, cy, size, max_reflect,
    dt, n_steps,
    n_species, d_arr, pot_kind, pot_params,
    init_counts, region_kind, region_rad,
    has_pair, annihilate, rb, lam, gamma,
    unbind_mode, mu, db_coef, kmax, qpts, qw,
    lin_src, lin_dst, lin_prob,
    cell_size, grid_nx, grid_ny,
    t_grid, out_totals,
    track_msd, out_track,
    stop_first_bind,
    cap,
    out_status, out_bind, out_final_n, out_final_pos,
):
    R = len(seeds)
    ncells = grid_nx * grid_ny
    for r in prange(R):
        pos_buf = np.zeros((n_species, cap, 2))
        n_buf = np.zeros(n_species, dtype=np.int64)
        head = np.full(ncells, -1, dtype=np.int64)
        nxt = np.zeros(cap, dtype=np.int64)
        touched = np.zeros(cap, dtype=np.int64)
        pair_a = np.zeros(_PAIR_CAP, dtype=np.int64)
        pair_b = np.zeros(_PAIR_CAP, dtype=np.int64)
        status, first_bind = _bd_core(
            seeds[r],
            code, cx, cy, size, max_reflect,
            dt, n_steps,
            n_species, d_arr, pot_kind, pot_params,
            init_counts, region_kind, region_rad,
            has_pair, annihilate, rb, lam, gamma,
            unbind_mode, mu, db_coef, kmax, qpts, qw,
            lin_src, lin_dst, lin_prob,
            cell_size, grid_nx, grid_ny,
            t_grid, out_totals[r],
            track_msd, out_track[r],
            stop_first_bind,
            pos_buf, n_buf,
            head, nxt, touched,
            pair_a, pair_b,
            out_final_n[r], out_final_pos[r],
        )
        out_status[r] = status
        out_bind[r] = first_bind


def _unbind_rate_bound(config, coef, qpts, qw, n_scan=160):
    """Upper bound on the unbinding rate over the domain, with margin."""
    code, cx, cy, size = config.domain_code()
    span = size if code == DOMAIN_SQUARE else 2 * size
    xs = np.linspace(cx - span / 2, cx + span / 2, n_scan)
    ys = np.linspace(cy - span / 2, cy + span / 2, n_scan)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    if code == DOMAIN_DISK:
        keep = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) <= size
        pts = pts[keep]
    sa, sb, sc = config.species[0], config.species[1], config.species[2]
    gamma = config.kernel.gamma
    x = pts[None, :, :] + (1.0 - gamma) * qpts[:, None, :]
    y = pts[None, :, :] - gamma * qpts[:, None, :]
    integ = np.exp(
        -(sa.potential.values(x.reshape(-1, 2)).reshape(len(qpts), -1)
          + sb.potential.values(y.reshape(-1, 2)).reshape(len(qpts), -1))
    )
    rates = coef * np.exp(sc.potential.values(pts)) * (qw @ integ)
    return float(rates.max()) * 1.1


def bd_simulate(config, t_end, n_realizations, master_seed, t_grid=None,
                track_first_particle=False, stop_after_first_bind=False):
    """Run a BD ensemble; outputs mirror the jump-process ensemble.

    Returns per-realization first binding times, species totals on the time
    grid, final particle counts and positions, and (optionally) the first
    particle's trajectory on the grid.
    """
    config.validate()
    code, cx, cy, size = config.domain_code()
    n_species = len(config.species)
    d_arr = np.array([s.diffusivity for s in config.species])
    pot_kind = np.zeros(n_species, dtype=np.int64)
    pot_params = np.zeros((n_species, 4))
    for s, sp in enumerate(config.species):
        k, p = potential_code(sp.potential)
        pot_kind[s] = k
        pot_params[s] = p
    init_counts = np.array([s.init_count for s in config.species], dtype=np.int64)
    region_kind = np.array([s.region[0] for s in config.species], dtype=np.int64)
    region_rad = np.array([s.region[1] for s in config.species])

    has_pair = config.kernel is not None
    annihilate = bool(config.annihilation)
    if has_pair and n_species < (2 if annihilate else 3):
        raise ValueError("pair reaction needs species A, B (and C unless annihilating)")
    rb = config.kernel.radius if has_pair else 0.0
    lam = config.kernel.rate if has_pair else 0.0
    gamma = config.kernel.gamma if has_pair else 0.5

    unbind_mode = 0
    mu = 0.0
    db_coef = 0.0
    kmax = 0.0
    if has_pair and not annihilate:
        if config.dissociation is None:
            raise ValueError("reversible pair reaction needs a dissociation spec")
        mode, value = config.dissociation
        if mode == "fixed_rate":
            unbind_mode = 2
            mu = float(value)
        elif mode == "detailed_balance":
            unbind_mode = 1
            kd = float(value)
            za = domain_partition_function(config.domain, config.species[0].potential)
            zb = domain_partition_function(config.domain, config.species[1].potential)
            zc = domain_partition_function(config.domain, config.species[2].potential)
            db_coef = kd * lam * zc / (za * zb)
        else:
            raise ValueError(f"unknown dissociation mode {mode!r}")
    qpts, qw = ball_rule(rb if rb > 0 else 1.0, n_r=12, n_theta=24)
    if unbind_mode == 1:
        kmax = _unbind_rate_bound(config, db_coef, qpts, qw)

    sp_index = {s.name: i for i, s in enumerate(config.species)}
    lin_src = np.array([sp_index[a] for a, _, _ in config.linear], dtype=np.int64)
    lin_dst = np.array([sp_index[b] for _, b, _ in config.linear], dtype=np.int64)
    lin_prob = np.array([-math.expm1(-r * config.dt) for _, _, r in config.linear])

    cap = int(init_counts.sum()) + 8
    cell_size = max(rb, size / 256.0) if has_pair else size
    grid_nx = max(int(np.ceil(2 * size / cell_size)), 1)
    grid_ny = grid_nx

    t_grid = np.asarray(t_grid, dtype=float) if t_grid is not None else np.zeros(0)
    n_steps = int(np.ceil(t_end / config.dt))
    R = int(n_realizations)
    seeds = stream_seeds(master_seed, R)
    out_totals = np.zeros((R, n_species, len(t_grid)), dtype=np.int64)
    out_track = np.zeros((R, len(t_grid), 2)) if track_first_particle else np.zeros((R, 0, 2))
    out_status = np.zeros(R, dtype=np.int64)
    out_bind = np.full(R, np.nan)
    out_final_n = np.zeros((R, n_species), dtype=np.int64)
    out_final_pos = np.zeros((R, n_species, cap, 2))

    _bd_ensemble(
        seeds,
        code, cx, cy, size, config.max_reflections,
        float(config.dt), n_steps,
        n_species, d_arr, pot_kind, pot_params,
        init_counts, region_kind, region_rad,
        has_pair, annihilate, rb, lam, gamma,
        unbind_mode, mu, db_coef, kmax, qpts, qw,
        lin_src, lin_dst, lin_prob,
        cell_size, grid_nx, grid_ny,
        t_grid, out_totals,
        track_first_particle, out_track,
        stop_after_first_bind,
        cap,
        out_status, out_bind, out_final_n, out_final_pos,
    )
    bad = np.nonzero(out_status)[0]
    if bad.size:
        msgs = {1: "reflection failed", 2: "pair buffer overflow",
                3: "product placement failed", 4: "unbind rate bound violated"}
        raise RuntimeError(f"realization {bad[0]}: {msgs.get(int(out_status[bad[0]]))}")
    return {
        "binding_times": out_bind,
        "grid_times": t_grid,
        "grid_counts": out_totals,
        "final_counts": out_final_n,
        "final_positions": out_final_pos,
        "track": out_track,
        "seeds": seeds,
    }
