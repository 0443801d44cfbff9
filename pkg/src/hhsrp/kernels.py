"""Compiled hot paths for the search engine.

The pure-Python routines in model.py define the semantics; these numba
kernels recompute the same timelines over flat arrays so the engine can
afford full-length searches. Status codes: 0 feasible, 1 time window,
2 break window, 3 working time. Break flags: 0 before service, 1 after
service; a break position equal to the visit count means the break is
taken at the depot on arrival.

Per-evaluation insertion noise derives from a caller-supplied 64-bit seed
through splitmix64, indexed by (candidate, slot), so a scan is a pure
function of its arguments.
"""

from __future__ import annotations

import numpy as np
from numba import njit

EPS = 1e-6

_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_M2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True)
def _noise_u01(seed, index):
    """Deterministic uniform [0,1) for evaluation #index under this seed."""
    z = (np.uint64(seed) + np.uint64(index + 1) * _SM_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * _SM_M1
    z = (z ^ (z >> np.uint64(27))) * _SM_M2
    z = z ^ (z >> np.uint64(31))
    return float(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def eval_route(visits, bpos, bflag, tt, a, b, d, bdur, bopen, bclose, max_work):
    """Forward pass of one route. Returns (status, depot_return, break_start).

    break_start is -1.0 when the violation precedes the break.
    """
    nv = visits.shape[0]
    now = 0.0
    loc = 0
    bstart = -1.0
    for pos in range(nv):
        pid = visits[pos]
        arrival = now + tt[loc, pid]
        if pos == bpos and bflag == 0:
            bs = arrival if arrival > bopen else bopen
            if bs > bclose + EPS:
                return 2, 0.0, bs
            bstart = bs
            start = bs + bdur
            if start < a[pid]:
                start = a[pid]
        else:
            start = arrival if arrival > a[pid] else a[pid]
        if start > b[pid] + EPS:
            return 1, 0.0, bstart
        now = start + d[pid]
        if pos == bpos and bflag == 1:
            bs = now if now > bopen else bopen
            if bs > bclose + EPS:
                return 2, 0.0, bs
            bstart = bs
            now = bs + bdur
        loc = pid
    arrival = now + tt[loc, 0]
    if bpos == nv:
        bs = arrival if arrival > bopen else bopen
        if bs > bclose + EPS:
            return 2, 0.0, bs
        bstart = bs
        arrival = bs + bdur
    if arrival > max_work + EPS:
        return 3, arrival, bstart
    return 0, arrival, bstart


@njit(cache=True)
def best_break(visits, tt, a, b, d, bdur, bopen, bclose, max_work):
    """Exhaustive break placement minimizing depot return.

    Tries every position with both flags plus the depot-on-arrival slot.
    Returns (found, bpos, bflag, depot_return); found is False when no
    placement is feasible.
    """
    nv = visits.shape[0]
    best_pos = -1
    best_flag = 0
    best_ret = np.inf
    for pos in range(nv + 1):
        nflags = 1 if pos == nv else 2
        for flag in range(nflags):
            status, ret, _ = eval_route(visits, pos, flag, tt, a, b, d,
                                        bdur, bopen, bclose, max_work)
            if status == 0 and ret < best_ret - EPS:
                best_ret = ret
                best_pos = pos
                best_flag = flag
    return best_pos >= 0, best_pos, best_flag, best_ret


@njit(cache=True)
def scan_insertions(visits, bpos, bflag, cands, tt, ct, a, b, d,
                    bdur, bopen, bclose, max_work, noise_amp, seed):
    """Best insertion of each candidate patient into one route.

    For every slot the break may stay at the incumbent placement (shifted
    past the slot) or move before/after the inserted patient; the placement
    with the earliest depot return wins the slot. Slot choice per candidate
    minimizes the (optionally noise-perturbed) travel-cost increase, ties
    to the lower slot. Returns parallel arrays over candidates:
    (feasible, chosen cost, true travel delta, slot, break pos, break flag,
    depot return), break coordinates already in post-insertion indexing.
    """
    nv = visits.shape[0]
    nc = cands.shape[0]
    out_feas = np.zeros(nc, np.bool_)
    out_cost = np.full(nc, np.inf)
    out_delta = np.full(nc, np.inf)
    out_slot = np.full(nc, -1, np.int64)
    out_bpos = np.full(nc, -1, np.int64)
    out_bflag = np.zeros(nc, np.int64)
    out_ret = np.full(nc, np.inf)
    trial = np.empty(nv + 1, np.int64)
    for ci in range(nc):
        p = cands[ci]
        for slot in range(nv + 1):
            for i in range(slot):
                trial[i] = visits[i]
            trial[slot] = p
            for i in range(slot, nv):
                trial[i + 1] = visits[i]
            prev = visits[slot - 1] if slot > 0 else 0
            nxt = visits[slot] if slot < nv else 0
            delta = ct[prev, p] + ct[p, nxt] - ct[prev, nxt]

            inc_pos = bpos if bpos < slot else bpos + 1
            sel_ret = np.inf
            sel_pos = -1
            sel_flag = 0
            for alt in range(3):
                if alt == 0:
                    tpos, tflag = inc_pos, bflag
                elif alt == 1:
                    tpos, tflag = slot, 0
                else:
                    tpos, tflag = slot, 1
                status, ret, _ = eval_route(trial, tpos, tflag, tt, a, b, d,
                                            bdur, bopen, bclose, max_work)
                if status == 0 and ret < sel_ret - EPS:
                    sel_ret = ret
                    sel_pos = tpos
                    sel_flag = tflag
            if sel_pos < 0:
                continue
            cost = delta
            if noise_amp > 0.0:
                u = _noise_u01(seed, ci * (nv + 1) + slot)
                cost += noise_amp * (2.0 * u - 1.0)
            if not out_feas[ci] or cost < out_cost[ci] - EPS:
                out_feas[ci] = True
                out_cost[ci] = cost
                out_delta[ci] = delta
                out_slot[ci] = slot
                out_bpos[ci] = sel_pos
                out_bflag[ci] = sel_flag
                out_ret[ci] = sel_ret
    return out_feas, out_cost, out_delta, out_slot, out_bpos, out_bflag, out_ret


def pack_arrays(instance):
    """Flat numpy views of an instance for the kernels, node 0 = depot."""
    n = instance.n
    tt = np.array(instance.travel_time, dtype=np.float64)
    ct = np.array(instance.travel_cost, dtype=np.float64)
    a = np.zeros(n + 1)
    b = np.zeros(n + 1)
    d = np.zeros(n + 1)
    cp = np.zeros(n + 1)
    for p in instance.patients:
        a[p.id] = p.tw_open
        b[p.id] = p.tw_close
        d[p.id] = p.duration
        cp[p.id] = p.penalty
    return tt, ct, a, b, d, cp
