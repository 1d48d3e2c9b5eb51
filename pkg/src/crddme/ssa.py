"""Exact stochastic simulation of the mesh jump process.

Channels cover hops (per species and directed edge), pair associations
(two-stage: the (i, j) channel fires, then the product voxel is drawn from
the precompiled placement alias table), dissociations (likewise), and
per-voxel linear conversions. Firing times follow the next reaction method:
absolute tentative times in an indexed binary heap, rescaled by old/new
propensity ratios on dependency updates, redrawn on reactivation from zero.

Realization r of an ensemble runs on an independent stream seeded by
SeedSequence(master_seed, spawn_key=(r,)); results are ordered by r, so
ensembles are bit-reproducible for a fixed master seed regardless of
thread count.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

__all__ = [
    "ChannelTable",
    "EventLog",
    "SimulationError",
    "build_channels",
    "build_alias",
    "simulate",
    "run_ensemble",
    "channel_dependents",
    "stream_seeds",
]

KIND_HOP = 0
KIND_ASSOC = 1
KIND_DISSOC = 2
KIND_LINEAR = 3

COUNT_CAP = 2**31 - 1

_STATUS_MESSAGES = {
    1: "negative copy number (internal invariant breach)",
    2: "copy number exceeded the 2^31 - 1 cap",
    3: "event log capacity exceeded",
}


class SimulationError(Exception):
    pass


@dataclass
class ChannelTable:
    """Flattened channel arrays consumed by the numba core."""

    n_species: int
    n_voxels: int
    species: list
    kind: np.ndarray
    q0: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    base: np.ndarray
    al_start: np.ndarray
    al_prob: np.ndarray
    al_alias: np.ndarray
    al_pay_a: np.ndarray
    al_pay_b: np.ndarray
    rd_start: np.ndarray
    rd_chan: np.ndarray
    sp_a: int = -1
    sp_b: int = -1
    sp_c: int = -1
    meta: dict = field(default_factory=dict, repr=False)

    @property
    def n_channels(self):
        return len(self.kind)

    def core_args(self):
        return (
            self.kind, self.q0, self.q1, self.q2, self.base,
            self.sp_a, self.sp_b, self.sp_c, self.n_voxels,
            self.al_start, self.al_prob, self.al_alias, self.al_pay_a, self.al_pay_b,
            self.rd_start, self.rd_chan,
        )


def build_alias(weights):
    """Vose alias table for a discrete distribution; deterministic."""
    w = np.asarray(weights, dtype=float)
    if len(w) == 0 or w.min() < 0 or w.sum() <= 0:
        raise ValueError("alias weights must be nonnegative with positive sum")
    p = w * (len(w) / w.sum())
    prob = np.ones(len(w))
    alias = np.arange(len(w), dtype=np.int64)
    small = [i for i in range(len(w)) if p[i] < 1.0]
    large = [i for i in range(len(w)) if p[i] >= 1.0]
    p = p.copy()
    while small and large:
        s = small.pop()
        l = large.pop()
        prob[s] = p[s]
        alias[s] = l
        p[l] = (p[l] + p[s]) - 1.0
        (small if p[l] < 1.0 else large).append(l)
    return prob, alias


def build_channels(rate_ops, species, tables=None, bimolecular=None, linear=()):
    """Assemble the channel table from hop operators and reaction tables.

    rate_ops: per-species RateOperator (or None for immobile species), in
    the order of `species`. bimolecular: (name_a, name_b, name_c) with
    name_c None for annihilation; requires `tables`. linear: iterable of
    (source_name, target_name, rate).
    """
    n_species = len(species)
    sp_index = {s: i for i, s in enumerate(species)}
    n_voxels = None
    for op in rate_ops:
        if op is None:
            continue
        if getattr(op, "diagnostic", False):
            raise ValueError("diagnostic (clamped) rate operators cannot be simulated")
        n_voxels = op.n if n_voxels is None else n_voxels
        if op.n != n_voxels:
            raise ValueError("rate operators live on different meshes")
    if n_voxels is None:
        if tables is None:
            raise ValueError("need at least one rate operator or reaction tables")
        n_voxels = tables.n_voxels
    if tables is not None and tables.n_voxels != n_voxels:
        raise ValueError("reaction tables and rate operators live on different meshes")

    kind, q0, q1, q2, base = [], [], [], [], []
    al_start = [0]
    al_prob, al_alias, al_pay_a, al_pay_b = [], [], [], []

    def push_alias(weights, pay_a, pay_b):
        prob, alias = build_alias(weights)
        al_prob.extend(prob)
        al_alias.extend(alias)
        al_pay_a.extend(pay_a)
        al_pay_b.extend(pay_b)
        al_start.append(al_start[-1] + len(prob))
        return len(al_start) - 2

    for s, op in enumerate(rate_ops):
        if op is None:
            continue
        coo = op.matrix.tocoo()
        order = np.lexsort((coo.row, coo.col))
        for idx in order:
            i, j, r = coo.row[idx], coo.col[idx], coo.data[idx]
            if i == j or r <= 0.0:
                continue
            kind.append(KIND_HOP)
            q0.append(s)
            q1.append(j)
            q2.append(i)
            base.append(r)

    sp_a = sp_b = sp_c = -1
    if bimolecular is not None:
        if tables is None:
            raise ValueError("bimolecular reaction requires tabulated rates")
        name_a, name_b, name_c = bimolecular
        sp_a = sp_index[name_a]
        sp_b = sp_index[name_b]
        if sp_a == sp_b:
            raise ValueError("the pair reaction needs two distinct species")
        sp_c = sp_index[name_c] if name_c is not None else -1
        for p in range(tables.n_pairs):
            i, j = tables.pairs[p]
            if tables.kplus_pair[p] <= 0:
                continue
            ks, rates = tables.placement_slice(p)
            aid = push_alias(rates, ks, np.zeros(len(ks), dtype=np.int64)) if sp_c >= 0 else -1
            kind.append(KIND_ASSOC)
            q0.append(int(i))
            q1.append(int(j))
            q2.append(aid)
            base.append(float(tables.kplus_pair[p]))
        if sp_c >= 0 and tables.km_total is not None:
            for k in range(n_voxels):
                if tables.km_total[k] <= 0:
                    continue
                ii, jj, rr = tables.dissociation_slice(k)
                aid = push_alias(rr, ii, jj)
                kind.append(KIND_DISSOC)
                q0.append(k)
                q1.append(aid)
                q2.append(-1)
                base.append(float(tables.km_total[k]))

    for src_name, dst_name, rate in linear:
        if rate < 0:
            raise ValueError("linear reaction rates must be nonnegative")
        src, dst = sp_index[src_name], sp_index[dst_name]
        for v in range(n_voxels):
            kind.append(KIND_LINEAR)
            q0.append(v)
            q1.append(src)
            q2.append(dst)
            base.append(float(rate))

    kind = np.array(kind, dtype=np.int8)
    q0 = np.array(q0, dtype=np.int64)
    q1 = np.array(q1, dtype=np.int64)
    q2 = np.array(q2, dtype=np.int64)
    base = np.array(base, dtype=np.float64)

    # reader map: (species, voxel) -> channels whose propensity reads it
    readers = [[] for _ in range(n_species * n_voxels)]
    for c in range(len(kind)):
        if kind[c] == KIND_HOP:
            readers[q0[c] * n_voxels + q1[c]].append(c)
        elif kind[c] == KIND_ASSOC:
            readers[sp_a * n_voxels + q0[c]].append(c)
            readers[sp_b * n_voxels + q1[c]].append(c)
        elif kind[c] == KIND_DISSOC:
            readers[sp_c * n_voxels + q0[c]].append(c)
        else:
            readers[q1[c] * n_voxels + q0[c]].append(c)
    rd_start = np.zeros(n_species * n_voxels + 1, dtype=np.int64)
    for key, lst in enumerate(readers):
        rd_start[key + 1] = rd_start[key] + len(lst)
    rd_chan = np.zeros(rd_start[-1], dtype=np.int64)
    for key, lst in enumerate(readers):
        rd_chan[rd_start[key]: rd_start[key + 1]] = lst

    return ChannelTable(
        n_species=n_species,
        n_voxels=n_voxels,
        species=list(species),
        kind=kind,
        q0=q0,
        q1=q1,
        q2=q2,
        base=base,
        al_start=np.array(al_start, dtype=np.int64),
        al_prob=np.array(al_prob, dtype=np.float64),
        al_alias=np.array(al_alias, dtype=np.int64),
        al_pay_a=np.array(al_pay_a, dtype=np.int64),
        al_pay_b=np.array(al_pay_b, dtype=np.int64),
        rd_start=rd_start,
        rd_chan=rd_chan,
        sp_a=sp_a,
        sp_b=sp_b,
        sp_c=sp_c,
    )


def channel_dependents(table, c):
    """Channels whose propensity can change when channel c fires.

    For association/dissociation the union runs over every possible
    placement target. Used to audit dependency closure.
    """
    N = table.n_voxels
    written = set()
    k = table.kind[c]
    if k == KIND_HOP:
        written = {(table.q0[c], table.q1[c]), (table.q0[c], table.q2[c])}
    elif k == KIND_ASSOC:
        written = {(table.sp_a, table.q0[c]), (table.sp_b, table.q1[c])}
        if table.sp_c >= 0:
            aid = table.q2[c]
            s, e = table.al_start[aid], table.al_start[aid + 1]
            written |= {(table.sp_c, kk) for kk in table.al_pay_a[s:e]}
    elif k == KIND_DISSOC:
        written = {(table.sp_c, table.q0[c])}
        aid = table.q1[c]
        s, e = table.al_start[aid], table.al_start[aid + 1]
        written |= {(table.sp_a, ii) for ii in table.al_pay_a[s:e]}
        written |= {(table.sp_b, jj) for jj in table.al_pay_b[s:e]}
    else:
        written = {(table.q1[c], table.q0[c]), (table.q2[c], table.q0[c])}
    deps = set()
    for sp, vox in written:
        key = sp * N + vox
        deps |= set(table.rd_chan[table.rd_start[key]: table.rd_start[key + 1]])
    return deps


def stream_seeds(master_seed, n):
    """Per-realization stream seeds: SeedSequence(master, spawn_key=(r,))."""
    return np.array(
        [
            np.random.SeedSequence(master_seed, spawn_key=(r,)).generate_state(1, np.uint32)[0]
            for r in range(n)
        ],
        dtype=np.uint32,
    )


@njit(cache=True, inline="always")
def _propensity(c, kind, q0, q1, q2, base, counts, sp_a, sp_b, sp_c):
    k = kind[c]
    if k == 0:
        return base[c] * counts[q0[c], q1[c]]
    if k == 1:
        return base[c] * counts[sp_a, q0[c]] * counts[sp_b, q1[c]]
    if k == 2:
        return base[c] * counts[sp_c, q0[c]]
    return base[c] * counts[q1[c], q0[c]]


@njit(cache=True, inline="always")
def _heap_up(heap, pos, times, i):
    while i > 0:
        parent = (i - 1) >> 1
        if times[heap[i]] < times[heap[parent]]:
            heap[i], heap[parent] = heap[parent], heap[i]
            pos[heap[i]] = i
            pos[heap[parent]] = parent
            i = parent
        else:
            break


@njit(cache=True, inline="always")
def _heap_down(heap, pos, times, i, n):
    while True:
        left = 2 * i + 1
        if left >= n:
            return
        smallest = left
        right = left + 1
        if right < n and times[heap[right]] < times[heap[left]]:
            smallest = right
        if times[heap[smallest]] < times[heap[i]]:
            heap[i], heap[smallest] = heap[smallest], heap[i]
            pos[heap[i]] = i
            pos[heap[smallest]] = smallest
            i = smallest
        else:
            return


@njit(cache=True, inline="always")
def _heap_fix(heap, pos, times, c, n):
    i = pos[c]
    _heap_up(heap, pos, times, i)
    _heap_down(heap, pos, times, pos[c], n)


@njit(cache=True, inline="always")
def _alias_draw(aid, al_start, al_prob, al_alias):
    s = al_start[aid]
    n = al_start[aid + 1] - s
    u = np.random.random() * n
    idx = int(u)
    if idx >= n:
        idx = n - 1
    if u - idx < al_prob[s + idx]:
        return s + idx
    return s + al_alias[s + idx]


@njit(cache=True)
def _nrm_core(
    counts,
    kind, q0, q1, q2, base,
    sp_a, sp_b, sp_c, n_voxels,
    al_start, al_prob, al_alias, al_pay_a, al_pay_b,
    rd_start, rd_chan,
    t_end,
    t_grid, grid_counts,
    snap_times, snaps,
    stop_after_first_assoc,
    rec, rec_times, rec_kind, rec_data,
):
    """One realization. Returns (status, n_events, first_assoc_time, t)."""
    C = len(kind)
    S = counts.shape[0]
    G = len(t_grid)
    K = len(snap_times)

    totals = np.zeros(S, dtype=np.int64)
    for s in range(S):
        t = 0
        for v in range(counts.shape[1]):
            t += counts[s, v]
        totals[s] = t

    prop = np.zeros(C)
    times = np.full(C, np.inf)
    heap = np.arange(C, dtype=np.int64)
    pos = np.arange(C, dtype=np.int64)
    stamp = np.full(C, -1, dtype=np.int64)
    for c in range(C):
        a = _propensity(c, kind, q0, q1, q2, base, counts, sp_a, sp_b, sp_c)
        prop[c] = a
        if a > 0.0:
            times[c] = np.random.exponential(1.0) / a
    for i in range(C // 2 - 1, -1, -1):
        _heap_down(heap, pos, times, i, C)

    g = 0
    si = 0
    n_ev = 0
    first_assoc = np.nan
    now = 0.0
    status = 0

    while C > 0:
        c = heap[0]
        t_next = times[c]
        if t_next > t_end or not np.isfinite(t_next):
            break
        while g < G and t_grid[g] < t_next:
            for s in range(S):
                grid_counts[s, g] = totals[s]
            g += 1
        while si < K and snap_times[si] < t_next:
            for s in range(S):
                for v in range(counts.shape[1]):
                    snaps[si, s, v] = counts[s, v]
            si += 1
        now = t_next

        k = kind[c]
        w0 = -1
        w1 = -1
        w2 = -1
        d0 = 0
        d1 = 0
        d2 = 0
        d3 = 0
        if k == 0:
            sp = q0[c]
            src = q1[c]
            dst = q2[c]
            counts[sp, src] -= 1
            counts[sp, dst] += 1
            if counts[sp, src] < 0:
                status = 1
                break
            if counts[sp, dst] > COUNT_CAP:
                status = 2
                break
            w0 = sp * n_voxels + src
            w1 = sp * n_voxels + dst
            d0, d1, d2, d3 = sp, src, dst, -1
        elif k == 1:
            i = q0[c]
            j = q1[c]
            counts[sp_a, i] -= 1
            counts[sp_b, j] -= 1
            totals[sp_a] -= 1
            totals[sp_b] -= 1
            if counts[sp_a, i] < 0 or counts[sp_b, j] < 0:
                status = 1
                break
            w0 = sp_a * n_voxels + i
            w1 = sp_b * n_voxels + j
            kp = -1
            if sp_c >= 0:
                slot = _alias_draw(q2[c], al_start, al_prob, al_alias)
                kp = al_pay_a[slot]
                counts[sp_c, kp] += 1
                totals[sp_c] += 1
                if counts[sp_c, kp] > COUNT_CAP:
                    status = 2
                    break
                w2 = sp_c * n_voxels + kp
            d0, d1, d2, d3 = i, j, kp, -1
        elif k == 2:
            kvox = q0[c]
            slot = _alias_draw(q1[c], al_start, al_prob, al_alias)
            ii = al_pay_a[slot]
            jj = al_pay_b[slot]
            counts[sp_c, kvox] -= 1
            counts[sp_a, ii] += 1
            counts[sp_b, jj] += 1
            totals[sp_c] -= 1
            totals[sp_a] += 1
            totals[sp_b] += 1
            if counts[sp_c, kvox] < 0:
                status = 1
                break
            if counts[sp_a, ii] > COUNT_CAP or counts[sp_b, jj] > COUNT_CAP:
                status = 2
                break
            w0 = sp_c * n_voxels + kvox
            w1 = sp_a * n_voxels + ii
            w2 = sp_b * n_voxels + jj
            d0, d1, d2, d3 = kvox, ii, jj, -1
        else:
            v = q0[c]
            src = q1[c]
            dst = q2[c]
            counts[src, v] -= 1
            counts[dst, v] += 1
            totals[src] -= 1
            totals[dst] += 1
            if counts[src, v] < 0:
                status = 1
                break
            if counts[dst, v] > COUNT_CAP:
                status = 2
                break
            w0 = src * n_voxels + v
            w1 = dst * n_voxels + v
            d0, d1, d2, d3 = v, src, dst, -1

        if rec:
            if n_ev >= len(rec_times):
                status = 3
                break
            rec_times[n_ev] = now
            rec_kind[n_ev] = k
            rec_data[n_ev, 0] = d0
            rec_data[n_ev, 1] = d1
            rec_data[n_ev, 2] = d2
            rec_data[n_ev, 3] = d3
        n_ev += 1

        fired_kind = k
        for w in (w0, w1, w2):
            if w < 0:
                continue
            for ridx in range(rd_start[w], rd_start[w + 1]):
                ch = rd_chan[ridx]
                if stamp[ch] == n_ev:
                    continue
                stamp[ch] = n_ev
                a_old = prop[ch]
                a_new = _propensity(ch, kind, q0, q1, q2, base, counts, sp_a, sp_b, sp_c)
                if ch == c:
                    if a_new > 0.0:
                        times[ch] = now + np.random.exponential(1.0) / a_new
                    else:
                        times[ch] = np.inf
                elif a_new <= 0.0:
                    times[ch] = np.inf
                elif a_old <= 0.0 or not np.isfinite(times[ch]):
                    times[ch] = now + np.random.exponential(1.0) / a_new
                else:
                    times[ch] = now + (a_old / a_new) * (times[ch] - now)
                prop[ch] = a_new
                _heap_fix(heap, pos, times, ch, C)

        if fired_kind == 1 and np.isnan(first_assoc):
            first_assoc = now
            if stop_after_first_assoc:
                break

    if status == 0:
        while g < G and t_grid[g] <= t_end:
            for s in range(S):
                grid_counts[s, g] = totals[s]
            g += 1
        while si < K and snap_times[si] <= t_end:
            for s in range(S):
                for v in range(counts.shape[1]):
                    snaps[si, s, v] = counts[s, v]
            si += 1
    return status, n_ev, first_assoc, now


@njit(cache=True, parallel=True)
def _ensemble_core(
    seeds,
    base_counts,
    init_species, init_counts, init_cdf,
    kind, q0, q1, q2, base,
    sp_a, sp_b, sp_c, n_voxels,
    al_start, al_prob, al_alias, al_pay_a, al_pay_b,
    rd_start, rd_chan,
    t_end,
    t_grid, out_grid,
    snap_times, out_snaps,
    stop_after_first_assoc,
    out_bind, out_status, out_nev,
):
    R = len(seeds)
    for r in prange(R):
        np.random.seed(seeds[r])
        counts = base_counts.copy()
        for ii in range(len(init_species)):
            sp = init_species[ii]
            for _ in range(init_counts[ii]):
                u = np.random.random()
                v = np.searchsorted(init_cdf, u)
                if v >= len(init_cdf):
                    v = len(init_cdf) - 1
                counts[sp, v] += 1
        dummy_rt = np.zeros(0)
        dummy_rk = np.zeros(0, dtype=np.int8)
        dummy_rd = np.zeros((0, 4), dtype=np.int64)
        status, n_ev, first_assoc, _ = _nrm_core(
            counts,
            kind, q0, q1, q2, base,
            sp_a, sp_b, sp_c, n_voxels,
            al_start, al_prob, al_alias, al_pay_a, al_pay_b,
            rd_start, rd_chan,
            t_end,
            t_grid, out_grid[r],
            snap_times, out_snaps[r],
            stop_after_first_assoc,
            False, dummy_rt, dummy_rk, dummy_rd,
        )
        out_bind[r] = first_assoc
        out_status[r] = status
        out_nev[r] = n_ev


@dataclass
class EventLog:
    """Timestamped event stream of one realization; replayable."""

    times: np.ndarray
    kinds: np.ndarray
    data: np.ndarray
    initial_counts: np.ndarray
    final_counts: np.ndarray
    t_end: float
    seed: int
    species: list
    first_assoc_time: float
    grid_times: np.ndarray = None
    grid_counts: np.ndarray = None
    snapshot_times: np.ndarray = None
    snapshots: np.ndarray = None
    meta_sp: tuple = (-1, -1, -1)

    @property
    def n_events(self):
        return len(self.times)

    def replay(self):
        """Re-apply all events to the initial state; returns final counts."""
        counts = self.initial_counts.copy()
        sp_a = self.meta_sp[0]
        sp_b = self.meta_sp[1]
        sp_c = self.meta_sp[2]
        for k, d in zip(self.kinds, self.data):
            if k == KIND_HOP:
                sp, src, dst = d[0], d[1], d[2]
                counts[sp, src] -= 1
                counts[sp, dst] += 1
            elif k == KIND_ASSOC:
                i, j, kp = d[0], d[1], d[2]
                counts[sp_a, i] -= 1
                counts[sp_b, j] -= 1
                if sp_c >= 0 and kp >= 0:
                    counts[sp_c, kp] += 1
            elif k == KIND_DISSOC:
                kvox, i, j = d[0], d[1], d[2]
                counts[sp_c, kvox] -= 1
                counts[sp_a, i] += 1
                counts[sp_b, j] += 1
            else:
                v, src, dst = d[0], d[1], d[2]
                counts[src, v] -= 1
                counts[dst, v] += 1
            if counts.min() < 0:
                raise SimulationError("replay produced a negative count")
        return counts


def simulate(table, counts0, t_end, seed, t_grid=None, snapshot_times=None,
             stop_after_first_assoc=False, max_events=2_000_000):
    """Run one realization, recording every event; returns an EventLog."""
    counts = np.array(counts0, dtype=np.int64)
    if counts.shape != (table.n_species, table.n_voxels):
        raise ValueError("counts0 has the wrong shape")
    if counts.min() < 0:
        raise ValueError("counts must be nonnegative")
    t_grid = np.asarray(t_grid, dtype=float) if t_grid is not None else np.zeros(0)
    snap_times = np.asarray(snapshot_times, dtype=float) if snapshot_times is not None else np.zeros(0)
    grid_counts = np.zeros((table.n_species, len(t_grid)), dtype=np.int64)
    snaps = np.zeros((len(snap_times), table.n_species, table.n_voxels), dtype=np.int64)
    rec_times = np.zeros(max_events)
    rec_kind = np.zeros(max_events, dtype=np.int8)
    rec_data = np.zeros((max_events, 4), dtype=np.int64)
    initial = counts.copy()
    _seed_numba(int(seed) & 0x7FFFFFFF)
    status, n_ev, first_assoc, _ = _nrm_core(
        counts, *table.core_args(), float(t_end),
        t_grid, grid_counts, snap_times, snaps,
        stop_after_first_assoc,
        True, rec_times, rec_kind, rec_data,
    )
    if status != 0:
        raise SimulationError(_STATUS_MESSAGES.get(status, f"status {status}"))
    return EventLog(
        times=rec_times[:n_ev].copy(),
        kinds=rec_kind[:n_ev].copy(),
        data=rec_data[:n_ev].copy(),
        initial_counts=initial,
        final_counts=counts,
        t_end=float(t_end),
        seed=int(seed),
        species=table.species,
        first_assoc_time=float(first_assoc),
        grid_times=t_grid,
        grid_counts=grid_counts,
        snapshot_times=snap_times,
        snapshots=snaps,
        meta_sp=(table.sp_a, table.sp_b, table.sp_c),
    )


@njit(cache=True)
def _seed_numba(seed):
    np.random.seed(seed)


def run_ensemble(table, base_counts, t_end, n_realizations, master_seed,
                 random_inits=(), init_weights=None,
                 t_grid=None, snapshot_times=None, stop_after_first_assoc=False):
    """Run an ensemble on independent streams; deterministic merge by index.

    random_inits: iterable of (species_name, count); each such particle is
    placed independently in a voxel drawn with probability proportional to
    init_weights (dual-cell areas for a uniform initial condition).
    Returns a dict with binding times, per-species totals on the grid, and
    per-voxel snapshots.
    """
    base = np.array(base_counts, dtype=np.int64)
    if base.shape != (table.n_species, table.n_voxels):
        raise ValueError("base_counts has the wrong shape")
    sp_index = {s: i for i, s in enumerate(table.species)}
    init_species = np.array([sp_index[s] for s, _ in random_inits], dtype=np.int64)
    init_counts = np.array([int(n) for _, n in random_inits], dtype=np.int64)
    if len(init_species) and init_weights is None:
        raise ValueError("random initial placement needs voxel weights")
    if init_weights is None:
        init_cdf = np.ones(table.n_voxels)
    else:
        w = np.asarray(init_weights, dtype=float)
        init_cdf = np.cumsum(w) / w.sum()
    t_grid = np.asarray(t_grid, dtype=float) if t_grid is not None else np.zeros(0)
    snap_times = np.asarray(snapshot_times, dtype=float) if snapshot_times is not None else np.zeros(0)

    R = int(n_realizations)
    seeds = stream_seeds(master_seed, R)
    out_grid = np.zeros((R, table.n_species, len(t_grid)), dtype=np.int64)
    out_snaps = np.zeros((R, len(snap_times), table.n_species, table.n_voxels), dtype=np.int64)
    out_bind = np.full(R, np.nan)
    out_status = np.zeros(R, dtype=np.int64)
    out_nev = np.zeros(R, dtype=np.int64)
    _ensemble_core(
        seeds, base,
        init_species, init_counts, init_cdf,
        *table.core_args(), float(t_end),
        t_grid, out_grid, snap_times, out_snaps,
        stop_after_first_assoc,
        out_bind, out_status, out_nev,
    )
    bad = np.nonzero(out_status)[0]
    if bad.size:
        raise SimulationError(
            f"realization {bad[0]}: " + _STATUS_MESSAGES.get(int(out_status[bad[0]]), "error")
        )
    return {
        "binding_times": out_bind,
        "grid_times": t_grid,
        "grid_counts": out_grid,
        "snapshot_times": snap_times,
        "snapshots": out_snaps,
        "n_events": out_nev,
        "seeds": seeds,
    }
