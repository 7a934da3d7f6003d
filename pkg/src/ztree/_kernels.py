"""Hot scoring kernels with a numba path and a pure-numpy fallback.

Candidate-subgroup scoring reduces to two primitives:

  * combo_aggregates -- per candidate conjunction, the sums of a few weight
    columns (count, outcome, outcome^2, rank, arm-split variants) over the
    member rows.  Every z formula is then O(1) per candidate.
  * logrank_oev -- per candidate conjunction, the log-rank observed-minus-
    expected sum and its hypergeometric variance over event-time groups.

Both exist as an @njit kernel and a numpy implementation.  The numba path is
used when numba imports and ZTREE_DISABLE_NUMBA is unset; results agree with
the fallback up to float summation order.  benchmarks/bench_kernels.py times
the two paths against each other.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("ZTREE_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG in ("1", "true", "yes", "on")

if not _DISABLED:
    os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")
    try:
        import numba
        from numba import njit, prange
        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


def set_threads(n: int | None) -> None:
    """Cap kernel parallelism; a no-op on the numpy fallback path."""
    if n is None or not NUMBA_ENABLED:
        return
    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def combo_aggregates_numpy(masks, combos, weights):
    masks = np.ascontiguousarray(masks, dtype=bool)
    combos = np.ascontiguousarray(combos, dtype=np.int32)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    k, depth = combos.shape
    if k == 0:
        return np.zeros((0, weights.shape[1]))
    if depth == 1:
        return masks[combos[:, 0]].astype(np.float64) @ weights
    out = np.empty((k, weights.shape[1]))
    for j in range(k):
        member = masks[combos[j, 0]].copy()
        for t in range(1, depth):
            a = combos[j, t]
            if a < 0:
                break
            member &= masks[a]
        out[j] = member.astype(np.float64) @ weights
    return out


def _logrank_groups(times, events, order):
    """Shared precomputation: tied-time group starts over the sorted order."""
    ts = times[order]
    starts = np.flatnonzero(np.r_[True, ts[1:] != ts[:-1]])
    return starts


def logrank_oev_numpy(masks, combos, order, times, events):
    masks = np.ascontiguousarray(masks, dtype=bool)
    combos = np.ascontiguousarray(combos, dtype=np.int32)
    k, depth = combos.shape
    n = order.shape[0]
    out = np.zeros((k, 2))
    if k == 0 or n == 0:
        return out
    ev_sorted = events[order].astype(np.float64)
    starts = _logrank_groups(times, events, order)
    g_sizes = np.diff(np.r_[starts, n]).astype(np.float64)
    d_tot = np.add.reduceat(ev_sorted, starts)
    n_at_risk = n - np.r_[0.0, np.cumsum(g_sizes)[:-1]]
    for j in range(k):
        member = masks[combos[j, 0]].copy()
        for t in range(1, depth):
            a = combos[j, t]
            if a < 0:
                break
            member &= masks[a]
        ms = member[order].astype(np.float64)
        da = np.add.reduceat(ev_sorted * ms, starts)
        ga = np.add.reduceat(ms, starts)
        na = ms.sum() - np.r_[0.0, np.cumsum(ga)[:-1]]
        nb = n_at_risk - na
        db = d_tot - da
        has_d = d_tot > 0
        ome = np.sum((da[has_d] * nb[has_d] - db[has_d] * na[has_d]) / n_at_risk[has_d])
        ok = has_d & (n_at_risk > 1)
        v = np.sum(d_tot[ok] * na[ok] * nb[ok] * (n_at_risk[ok] - d_tot[ok])
                   / (n_at_risk[ok] * n_at_risk[ok] * (n_at_risk[ok] - 1.0)))
        out[j, 0] = ome
        out[j, 1] = v
    return out


if NUMBA_ENABLED:

    @njit(cache=True, parallel=True)
    def _combo_aggregates_jit(masks, combos, weights):  # pragma: no cover - jit
        k, depth = combos.shape
        n = masks.shape[1]
        m = weights.shape[1]
        out = np.zeros((k, m))
        for j in prange(k):
            for i in range(n):
                ok = True
                for t in range(depth):
                    a = combos[j, t]
                    if a < 0:
                        break
                    if not masks[a, i]:
                        ok = False
                        break
                if ok:
                    for c in range(m):
                        out[j, c] += weights[i, c]
        return out

    @njit(cache=True, parallel=True)
    def _logrank_oev_jit(masks, combos, order, times, events):  # pragma: no cover - jit
        k, depth = combos.shape
        n = order.shape[0]
        out = np.zeros((k, 2))
        for j in prange(k):
            member = np.zeros(n, dtype=np.bool_)
            na = 0
            for i in range(n):
                ok = True
                for t in range(depth):
                    a = combos[j, t]
                    if a < 0:
                        break
                    if not masks[a, i]:
                        ok = False
                        break
                member[i] = ok
                if ok:
                    na += 1
            nb = n - na
            ome = 0.0
            v = 0.0
            pos = 0
            while pos < n:
                t0 = times[order[pos]]
                d = 0
                da = 0
                g = 0
                ga = 0
                q = pos
                while q < n and times[order[q]] == t0:
                    row = order[q]
                    if member[row]:
                        ga += 1
                        if events[row] == 1:
                            d += 1
                            da += 1
                    else:
                        if events[row] == 1:
                            d += 1
                    g += 1
                    q += 1
                ntot = na + nb
                if d > 0:
                    db = d - da
                    ome += (da * nb - db * na) / ntot
                    if ntot > 1:
                        v += d * na * nb * (ntot - d) / (ntot * ntot * (ntot - 1.0))
                na -= ga
                nb -= g - ga
                pos = q
            out[j, 0] = ome
            out[j, 1] = v
        return out

    def combo_aggregates_numba(masks, combos, weights):
        masks = np.ascontiguousarray(masks, dtype=bool)
        combos = np.ascontiguousarray(combos, dtype=np.int32)
        weights = np.ascontiguousarray(weights, dtype=np.float64)
        if combos.shape[0] == 0:
            return np.zeros((0, weights.shape[1]))
        return _combo_aggregates_jit(masks, combos, weights)

    def logrank_oev_numba(masks, combos, order, times, events):
        masks = np.ascontiguousarray(masks, dtype=bool)
        combos = np.ascontiguousarray(combos, dtype=np.int32)
        order = np.ascontiguousarray(order, dtype=np.int64)
        times = np.ascontiguousarray(times, dtype=np.float64)
        events = np.ascontiguousarray(events, dtype=np.int8)
        if combos.shape[0] == 0:
            return np.zeros((0, 2))
        return _logrank_oev_jit(masks, combos, order, times, events)

    combo_aggregates = combo_aggregates_numba
    logrank_oev = logrank_oev_numba
else:
    combo_aggregates_numba = None
    logrank_oev_numba = None
    combo_aggregates = combo_aggregates_numpy
    logrank_oev = logrank_oev_numpy
