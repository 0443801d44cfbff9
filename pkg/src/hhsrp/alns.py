"""Adaptive large neighborhood search for routes with mandatory breaks.

Each iteration destroys part of the current solution with one of six removal
heuristics, rebuilds it with one of six insertion heuristics (greedy or
regret-2/3, each with or without cost noise), and decides acceptance by
simulated annealing. Or-opt segment relocation and an exhaustive break
re-placement run as periodic local searches on the current solution. When
the best solution stalls for omega iterations the search restarts from it
with a plain random-removal / regret-3 step.

Heuristic selection is uniform at random; there is no weight adaptation.

RNG stream discipline (one stdlib Random per run, documented so runs are
reproducible bit-for-bit): per iteration the draws are, in order,
(1) removal heuristic index (skipped on restart iterations), (2) removal
size q, (3) the removal's internal draws, (4) insertion heuristic index
(skipped on restarts), (5) one 64-bit noise sub-seed per route scan when
the insertion variant uses noise, (6) one acceptance uniform. Worst removal
draws nothing. Noise values inside a scan come from the sub-seed via a
counter-indexed splitmix64, one per evaluated (candidate, slot).
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import (AFTER, BEFORE, BreakPlacement, CostBreakdown, RoutePlan,
                    Solution, solution_cost)

EPS = 1e-6

REMOVAL_NAMES = ("random", "worst", "shaw", "proximity", "time", "route")
INSERTION_NAMES = ("greedy", "greedy_noise", "regret2", "regret2_noise",
                   "regret3", "regret3_noise")

_VARIANTS = {
    "A0": dict(omega=750, tau_or=150, tau_break=200),
    "A1": dict(omega=750, tau_or=None, tau_break=200),
    "A2": dict(omega=1250, tau_or=200, tau_break=None),
    "A3": dict(omega=1250, tau_or=None, tau_break=None),
}

VARIANT_IDS = tuple(sorted(_VARIANTS))


@dataclass
class SearchConfig:
    """Tuned parameter set; defaults are the benchmark values for variant A0."""

    theta: int = 25000          # minimum iteration count
    theta_bar: int = 1500       # stop once best unimproved this long past theta
    omega: int = 750            # restart after this many unimproving iterations
    tau_or: int | None = 150    # Or-opt every tau_or iterations (None = never)
    tau_break: int | None = 200  # break search cadence (None = never)
    cooling: float = 0.99975    # temperature multiplier per iteration
    gamma: float = 0.05         # start temperature = gamma * f(init) / ln 2
    noise_mu: float = 0.1       # noise amplitude = mu * max travel cost
    shaw_alpha: float = 0.3     # relatedness weight on travel time
    shaw_beta: float = 0.1      # relatedness weight on window distance
    q_min_frac: float = 0.1     # removal size lower fraction of n
    q_max_frac: float = 0.3
    seed: int = 0
    restart_reset_to_best: bool = True
    collect_trace: bool = True

    @classmethod
    def for_variant(cls, variant, **overrides):
        if variant not in _VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANT_IDS}")
        params = dict(_VARIANTS[variant])
        params.update(overrides)
        return cls(**params)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    removal: str            # removal heuristic name, or "restart"
    insertion: str
    q: int
    f_new: float
    accepted: bool
    f_curr: float
    f_best: float
    temperature: float
    bank_size: int
    or_opt: bool = False
    break_search: bool = False


@dataclass
class SearchResult:
    best: Solution
    cost: CostBreakdown
    iterations: int
    restarts: int
    wall_time: float
    initial_cost: float
    trace: list[TraceRecord] | None = None


def init_temperature(f_init, gamma=0.05):
    """Start temperature such that a gamma-fraction uphill move is accepted
    with probability 0.5; floored at 1e-6 so a zero-cost start still cools."""
    t = gamma * f_init / math.log(2.0)
    return t if t > 1e-6 else 1e-6


def sa_accept(f_new, f_curr, temperature, rng):
    """Simulated-annealing test; always consumes exactly one uniform."""
    u = rng.random()
    if f_new < f_curr:
        return True
    return u < math.exp(-(f_new - f_curr) / temperature)


class _Context:
    """Per-run packed arrays and instance constants."""

    def __init__(self, instance):
        self.instance = instance
        self.tt, self.ct, self.a, self.b, self.d, self.cp = kernels.pack_arrays(instance)
        self.ct_rows = instance.travel_cost          # list-of-lists for Python loops
        self.tt_rows = instance.travel_time
        self.bdur = instance.break_policy.duration
        self.bopen = instance.break_policy.window_open
        self.bclose = instance.break_policy.window_close
        self.max_work = [c.max_working_time for c in instance.caregivers]
        self.eligible = [set(c.eligible) for c in instance.caregivers]
        self.tmax_cost = instance.max_travel_cost
        self.tmax_time = max(instance.max_travel_time, EPS)
        self.horizon = max(max(self.max_work, default=0.0),
                           max((p.tw_close for p in instance.patients), default=0.0), EPS)
        self.windows = {p.id: (p.tw_open, p.tw_close) for p in instance.patients}
        self.penalties = {p.id: p.penalty for p in instance.patients}


class _Route:
    __slots__ = ("cidx", "visits", "bpos", "bflag", "travel", "dret", "arr")

    def __init__(self, cidx, visits, bpos, bflag, travel, dret):
        self.cidx = cidx
        self.visits = visits
        self.bpos = bpos
        self.bflag = bflag
        self.travel = travel
        self.dret = dret
        self.arr = np.array(visits, dtype=np.int64)

    def refresh_array(self):
        self.arr = np.array(self.visits, dtype=np.int64)

    def clone(self):
        r = _Route.__new__(_Route)
        r.cidx = self.cidx
        r.visits = list(self.visits)
        r.bpos = self.bpos
        r.bflag = self.bflag
        r.travel = self.travel
        r.dret = self.dret
        r.arr = self.arr
        return r


class _State:
    __slots__ = ("routes", "bank", "assigned", "travel", "penalty")

    @property
    def total(self):
        return self.travel + self.penalty

    def clone(self):
        s = _State.__new__(_State)
        s.routes = [r.clone() for r in self.routes]
        s.bank = set(self.bank)
        s.assigned = dict(self.assigned)
        s.travel = self.travel
        s.penalty = self.penalty
        return s


def _empty_state(ctx):
    s = _State.__new__(_State)
    s.routes = []
    for i, _cg in enumerate(ctx.instance.caregivers):
        dret = _route_return(ctx, i, [], 0, 0)
        s.routes.append(_Route(i, [], 0, 0, 0.0, dret))
    s.bank = {p.id for p in ctx.instance.patients}
    s.assigned = {}
    s.travel = 0.0
    s.penalty = sum(ctx.penalties[p] for p in s.bank)
    return s


def _route_return(ctx, cidx, visits, bpos, bflag):
    status, ret, _ = kernels.eval_route(
        np.array(visits, dtype=np.int64), bpos, bflag, ctx.tt, ctx.a, ctx.b,
        ctx.d, ctx.bdur, ctx.bopen, ctx.bclose, ctx.max_work[cidx])
    return ret if status == 0 else math.inf


def _state_from_solution(ctx, solution):
    inst = ctx.instance
    s = _State.__new__(_State)
    s.routes = []
    s.assigned = {}
    order = {c.id: i for i, c in enumerate(inst.caregivers)}
    by_cidx = {}
    for r in solution.routes:
        by_cidx[order[r.caregiver_id]] = r
    travel = 0.0
    for i, _cg in enumerate(inst.caregivers):
        r = by_cidx[i]
        bp = r.break_placement
        bpos = bp.position
        bflag = 0 if bp.flag == BEFORE else 1
        cost = _python_route_travel(ctx, r.visits)
        dret = _route_return(ctx, i, r.visits, bpos, bflag)
        s.routes.append(_Route(i, list(r.visits), bpos, bflag, cost, dret))
        for pid in r.visits:
            s.assigned[pid] = i
        travel += cost
    s.bank = set(solution.bank)
    s.travel = travel
    s.penalty = sum(ctx.penalties[p] for p in s.bank)
    return s


def _python_route_travel(ctx, visits):
    ct = ctx.ct_rows
    loc = 0
    total = 0.0
    for pid in visits:
        total += ct[loc][pid]
        loc = pid
    return total + ct[loc][0]


def _solution_from_state(ctx, state):
    inst = ctx.instance
    routes = []
    for i, cg in enumerate(inst.caregivers):
        r = state.routes[i]
        flag = BEFORE if r.bflag == 0 else AFTER
        routes.append(RoutePlan(cg.id, list(r.visits), BreakPlacement(r.bpos, flag)))
    return Solution(routes, set(state.bank))


# ---------------------------------------------------------------------------
# removal heuristics


def _draw_q(rng, n, lo_frac=0.1, hi_frac=0.3):
    # the 1e-9 guards keep e.g. ceil(0.1*30) from landing on 4
    lo = math.ceil(lo_frac * n - 1e-9)
    hi = math.floor(hi_frac * n + 1e-9)
    if lo > hi:
        return max(1, math.floor(lo_frac * n + 1e-9))
    return rng.randint(lo, hi)


def _bank_route(ctx, state, ridx):
    """Empty a route into the bank (last-resort feasibility fallback)."""
    r = state.routes[ridx]
    for pid in r.visits:
        del state.assigned[pid]
        state.bank.add(pid)
        state.penalty += ctx.penalties[pid]
    state.travel -= r.travel
    r.visits = []
    r.travel = 0.0
    r.bpos = 0
    r.bflag = 0
    r.refresh_array()
    r.dret = _route_return(ctx, r.cidx, [], 0, 0)


def _remove_pid(ctx, state, pid):
    ridx = state.assigned.pop(pid)
    r = state.routes[ridx]
    idx = r.visits.index(pid)
    ct = ctx.ct_rows
    prev = r.visits[idx - 1] if idx > 0 else 0
    nxt = r.visits[idx + 1] if idx + 1 < len(r.visits) else 0
    saving = ct[prev][pid] + ct[pid][nxt] - ct[prev][nxt]
    r.visits.pop(idx)
    if r.bpos == idx:
        r.bpos, r.bflag = idx, 0    # re-anchor before the successor node
    elif r.bpos > idx:
        r.bpos -= 1
    r.refresh_array()
    r.travel -= saving
    state.travel -= saving
    state.bank.add(pid)
    state.penalty += ctx.penalties[pid]
    status, ret, _ = kernels.eval_route(r.arr, r.bpos, r.bflag, ctx.tt, ctx.a,
                                        ctx.b, ctx.d, ctx.bdur, ctx.bopen,
                                        ctx.bclose, ctx.max_work[ridx])
    if status == 0:
        r.dret = ret
        return
    found, bpos, bflag, best_ret = kernels.best_break(
        r.arr, ctx.tt, ctx.a, ctx.b, ctx.d, ctx.bdur, ctx.bopen, ctx.bclose,
        ctx.max_work[ridx])
    if found:
        r.bpos, r.bflag, r.dret = int(bpos), int(bflag), best_ret
    else:
        _bank_route(ctx, state, ridx)


def _removal_saving(ctx, r, idx):
    ct = ctx.ct_rows
    v = r.visits
    prev = v[idx - 1] if idx > 0 else 0
    nxt = v[idx + 1] if idx + 1 < len(v) else 0
    pid = v[idx]
    return ct[prev][pid] + ct[pid][nxt] - ct[prev][nxt]


def _random_removal(ctx, state, q, rng):
    routed = sorted(state.assigned)
    for pid in rng.sample(routed, min(q, len(routed))):
        _remove_pid(ctx, state, pid)


def _worst_removal(ctx, state, q, rng):
    """Repeated argmax of travel-cost saving; deterministic, ties to low id."""
    for _ in range(min(q, len(state.assigned))):
        best = None
        for r in state.routes:
            for idx in range(len(r.visits)):
                key = (_removal_saving(ctx, r, idx), -r.visits[idx])
                if best is None or key > best[0]:
                    best = (key, r.visits[idx])
        if best is None:
            return
        _remove_pid(ctx, state, best[1])


def _relatedness(ctx, alpha, beta, pid, other):
    tpart = ctx.tt_rows[pid][other] / ctx.tmax_time
    a1, b1 = ctx.windows[pid]
    a2, b2 = ctx.windows[other]
    wpart = (abs(a1 - a2) + abs(b1 - b2)) / ctx.horizon
    return alpha * tpart + beta * wpart


def _shaw_family_removal(ctx, state, q, rng, alpha, beta):
    routed = sorted(state.assigned)
    if not routed:
        return
    seed = routed[rng.randrange(len(routed))]
    _remove_pid(ctx, state, seed)
    removed = [seed]
    while len(removed) < q and state.assigned:
        ref = removed[rng.randrange(len(removed))]
        pick = min(state.assigned,
                   key=lambda pid: (_relatedness(ctx, alpha, beta, ref, pid), pid))
        _remove_pid(ctx, state, pick)
        removed.append(pick)


def _route_removal(ctx, state, q, rng):
    nonempty = [i for i, r in enumerate(state.routes) if r.visits]
    if not nonempty:
        return
    ridx = nonempty[rng.randrange(len(nonempty))]
    for pid in list(state.routes[ridx].visits):
        _remove_pid(ctx, state, pid)


def _make_removal_table(cfg):
    return (
        _random_removal,
        _worst_removal,
        lambda ctx, s, q, rng: _shaw_family_removal(ctx, s, q, rng,
                                                    cfg.shaw_alpha, cfg.shaw_beta),
        lambda ctx, s, q, rng: _shaw_family_removal(ctx, s, q, rng,
                                                    cfg.shaw_alpha, 0.0),
        lambda ctx, s, q, rng: _shaw_family_removal(ctx, s, q, rng,
                                                    0.0, cfg.shaw_beta),
        _route_removal,
    )


# ---------------------------------------------------------------------------
# insertion heuristics


def _scan_route(ctx, state, ridx, bank_sorted, rng, noise, noise_amp):
    route = state.routes[ridx]
    elig = ctx.eligible[ridx]
    cands = [p for p in bank_sorted if p in elig]
    if not cands:
        return {}
    seed = np.uint64(rng.getrandbits(64)) if noise else np.uint64(0)
    amp = noise_amp if noise else 0.0
    feas, cost, delta, slot, bpos, bflag, ret = kernels.scan_insertions(
        route.arr, route.bpos, route.bflag, np.array(cands, dtype=np.int64),
        ctx.tt, ctx.ct, ctx.a, ctx.b, ctx.d, ctx.bdur, ctx.bopen, ctx.bclose,
        ctx.max_work[ridx], amp, seed)
    return {p: (cost[i], delta[i], int(slot[i]), int(bpos[i]), int(bflag[i]), ret[i])
            for i, p in enumerate(cands) if feas[i]}


def _commit_insert(ctx, state, ridx, pid, entry):
    _cost, delta, slot, bpos, bflag, ret = entry
    r = state.routes[ridx]
    r.visits.insert(slot, pid)
    r.bpos = bpos
    r.bflag = bflag
    r.refresh_array()
    r.travel += delta
    r.dret = ret
    state.travel += delta
    state.bank.remove(pid)
    state.penalty -= ctx.penalties[pid]
    state.assigned[pid] = ridx


def _greedy_select(bank_sorted, caches):
    best = None
    for ridx, cache in enumerate(caches):
        for pid, entry in cache.items():
            key = (entry[0], pid, ridx)
            if best is None or key < best[0]:
                best = (key, pid, ridx)
    if best is None:
        return None
    return best[1], best[2]


def _regret_select(k, bank_sorted, caches):
    short = None   # patients insertable in fewer than k routes
    full = None
    for pid in bank_sorted:
        offers = []
        for ridx, cache in enumerate(caches):
            if pid in cache:
                offers.append((cache[pid][0], ridx))
        if not offers:
            continue
        offers.sort()
        best_cost, best_ridx = offers[0]
        nroutes = len(offers)
        regret = sum(offers[h][0] - best_cost for h in range(1, min(k, nroutes)))
        if nroutes < k:
            key = (nroutes, -regret, best_cost, pid)
            if short is None or key < short[0]:
                short = (key, pid, best_ridx)
        else:
            key = (-regret, best_cost, pid)
            if full is None or key < full[0]:
                full = (key, pid, best_ridx)
    chosen = short if short is not None else full
    if chosen is None:
        return None
    return chosen[1], chosen[2]


def _greedy_insert(ctx, state, rng, noise, mu):
    def select(bank_sorted, caches):
        return _greedy_select(bank_sorted, caches)
    _insert_with_mu(ctx, state, rng, noise, mu, select)


def _regret_insert(ctx, state, k, rng, noise, mu):
    def select(bank_sorted, caches):
        return _regret_select(k, bank_sorted, caches)
    _insert_with_mu(ctx, state, rng, noise, mu, select)


def _insert_with_mu(ctx, state, rng, noise, mu, select):
    noise_amp = ctx.tmax_cost * mu
    bank_sorted = sorted(state.bank)
    caches = [_scan_route(ctx, state, ridx, bank_sorted, rng, noise, noise_amp)
              for ridx in range(len(state.routes))]
    while True:
        pick = select(bank_sorted, caches)
        if pick is None:
            return
        pid, ridx = pick
        _commit_insert(ctx, state, ridx, pid, caches[ridx][pid])
        bank_sorted.remove(pid)
        for c in caches:
            c.pop(pid, None)
        caches[ridx] = _scan_route(ctx, state, ridx, bank_sorted, rng, noise,
                                   noise_amp)


def _make_insertion_table(cfg):
    mu = cfg.noise_mu
    return (
        lambda ctx, s, rng: _greedy_insert(ctx, s, rng, False, mu),
        lambda ctx, s, rng: _greedy_insert(ctx, s, rng, True, mu),
        lambda ctx, s, rng: _regret_insert(ctx, s, 2, rng, False, mu),
        lambda ctx, s, rng: _regret_insert(ctx, s, 2, rng, True, mu),
        lambda ctx, s, rng: _regret_insert(ctx, s, 3, rng, False, mu),
        lambda ctx, s, rng: _regret_insert(ctx, s, 3, rng, True, mu),
    )


# ---------------------------------------------------------------------------
# local searches


def _try_break_candidates(ctx, r, new_visits, candidates):
    arr = np.array(new_visits, dtype=np.int64)
    sel = None
    for pos, flag in candidates:
        status, ret, _ = kernels.eval_route(arr, pos, flag, ctx.tt, ctx.a,
                                            ctx.b, ctx.d, ctx.bdur, ctx.bopen,
                                            ctx.bclose, ctx.max_work[r.cidx])
        if status == 0 and (sel is None or ret < sel[2] - EPS):
            sel = (pos, flag, ret)
    return sel


def _or_opt_route(ctx, state, ridx):
    """Relocate segments of length 1..3 inside one route, first improvement,
    repeated to a local optimum. Only strict travel-cost reductions that stay
    feasible (break re-anchored or moved next to the segment) are applied."""
    ct = ctx.ct_rows
    r = state.routes[ridx]
    improved_any = False
    improving = True
    while improving:
        improving = False
        visits = r.visits
        nv = len(visits)
        host = r.visits[r.bpos] if r.bpos < nv else None  # None = depot slot
        for seg_len in (1, 2, 3):
            if seg_len > nv - 1:
                break
            for i in range(nv - seg_len + 1):
                seg = visits[i:i + seg_len]
                rest = visits[:i] + visits[i + seg_len:]
                prev_r = visits[i - 1] if i > 0 else 0
                next_r = visits[i + seg_len] if i + seg_len < nv else 0
                d_rem = ct[prev_r][next_r] - ct[prev_r][seg[0]] - ct[seg[-1]][next_r]
                for j in range(len(rest) + 1):
                    if j == i:
                        continue
                    prev_i = rest[j - 1] if j > 0 else 0
                    next_i = rest[j] if j < len(rest) else 0
                    delta = (d_rem + ct[prev_i][seg[0]] + ct[seg[-1]][next_i]
                             - ct[prev_i][next_i])
                    if delta >= -EPS:
                        continue
                    cand = rest[:j] + seg + rest[j:]
                    if host is None:
                        inc = (nv, 0)
                    else:
                        inc = (cand.index(host), r.bflag)
                    sel = _try_break_candidates(
                        ctx, r, cand,
                        (inc, (j, 0), (j + seg_len - 1, 1)))
                    if sel is None:
                        continue
                    r.visits = cand
                    r.bpos, r.bflag, r.dret = sel[0], sel[1], sel[2]
                    r.refresh_array()
                    r.travel += delta
                    state.travel += delta
                    improving = True
                    improved_any = True
                    break
                if improving:
                    break
            if improving:
                break
    return improved_any


def _or_opt(ctx, state):
    changed = False
    for ridx in range(len(state.routes)):
        if len(state.routes[ridx].visits) >= 2:
            changed |= _or_opt_route(ctx, state, ridx)
    return changed


def _break_search(ctx, state):
    """Exhaustive break re-placement per route, keeping the earliest depot
    return. Travel cost is untouched; this only compacts schedules."""
    changed = False
    for r in state.routes:
        found, bpos, bflag, ret = kernels.best_break(
            r.arr, ctx.tt, ctx.a, ctx.b, ctx.d, ctx.bdur, ctx.bopen,
            ctx.bclose, ctx.max_work[r.cidx])
        if found and ret < r.dret - EPS:
            r.bpos, r.bflag, r.dret = int(bpos), int(bflag), ret
            changed = True
    return changed


# ---------------------------------------------------------------------------
# public single-step operators (thin wrappers over the engine internals)


def _wrap_removal(fn_index):
    def op(instance, solution, q, rng, config=None):
        cfg = config or SearchConfig()
        ctx = _Context(instance)
        state = _state_from_solution(ctx, solution)
        _make_removal_table(cfg)[fn_index](ctx, state, q, rng)
        return _solution_from_state(ctx, state)
    return op


random_removal = _wrap_removal(0)
worst_removal = _wrap_removal(1)
shaw_removal = _wrap_removal(2)
proximity_removal = _wrap_removal(3)
time_removal = _wrap_removal(4)
route_removal = _wrap_removal(5)


def greedy_insert(instance, solution, rng, noise=False, config=None):
    cfg = config or SearchConfig()
    ctx = _Context(instance)
    state = _state_from_solution(ctx, solution)
    _greedy_insert(ctx, state, rng, noise, cfg.noise_mu)
    return _solution_from_state(ctx, state)


def regret_insert(instance, solution, k, rng, noise=False, config=None):
    if k < 2:
        raise ValueError("regret level k must be >= 2")
    cfg = config or SearchConfig()
    ctx = _Context(instance)
    state = _state_from_solution(ctx, solution)
    _regret_insert(ctx, state, k, rng, noise, cfg.noise_mu)
    return _solution_from_state(ctx, state)


def or_opt(instance, solution):
    ctx = _Context(instance)
    state = _state_from_solution(ctx, solution)
    _or_opt(ctx, state)
    return _solution_from_state(ctx, state)


def break_local_search(instance, solution):
    ctx = _Context(instance)
    state = _state_from_solution(ctx, solution)
    _break_search(ctx, state)
    return _solution_from_state(ctx, state)


def build_initial(instance, rng, noise=True, config=None):
    """Construction: everything banked, then regret-3 insertion (noised)."""
    cfg = config or SearchConfig()
    ctx = _Context(instance)
    state = _empty_state(ctx)
    _regret_insert(ctx, state, 3, rng, noise, cfg.noise_mu)
    return _solution_from_state(ctx, state)


# ---------------------------------------------------------------------------
# main loop


def run(instance, config=None):
    cfg = config or SearchConfig()
    t_start = time.perf_counter()
    rng = random.Random(cfg.seed)
    ctx = _Context(instance)
    n = instance.n

    state = _empty_state(ctx)
    _regret_insert(ctx, state, 3, rng, True, cfg.noise_mu)
    f_init = state.total
    best = state.clone()
    f_best = f_init
    temperature = init_temperature(f_init, cfg.gamma)
    trace = [] if cfg.collect_trace else None

    removals = _make_removal_table(cfg)
    insertions = _make_insertion_table(cfg)

    anyone_insertable = any(
        any(p.id in elig for elig in ctx.eligible) for p in instance.patients)

    iterations = 0
    restarts = 0
    last_improve = 0
    since_improve = 0

    if cfg.theta > 0 and anyone_insertable:
        t = 0
        while True:
            if t >= cfg.theta and (t - last_improve) >= cfg.theta_bar:
                break
            t += 1
            is_restart = since_improve >= cfg.omega
            if is_restart:
                restarts += 1
                since_improve = 0
                if cfg.restart_reset_to_best:
                    state = best.clone()
                cand = state.clone()
                q = _draw_q(rng, n, cfg.q_min_frac, cfg.q_max_frac)
                _random_removal(ctx, cand, q, rng)
                _regret_insert(ctx, cand, 3, rng, False, cfg.noise_mu)
                removal_name, insertion_name = "restart", "regret3"
            else:
                ridx_op = rng.randrange(6)
                q = _draw_q(rng, n, cfg.q_min_frac, cfg.q_max_frac)
                cand = state.clone()
                removals[ridx_op](ctx, cand, q, rng)
                iidx_op = rng.randrange(6)
                insertions[iidx_op](ctx, cand, rng)
                removal_name = REMOVAL_NAMES[ridx_op]
                insertion_name = INSERTION_NAMES[iidx_op]

            did_or = False
            did_break = False
            if cfg.tau_or and t % cfg.tau_or == 0:
                _or_opt(ctx, state)
                did_or = True
            if cfg.tau_break and t % cfg.tau_break == 0:
                _break_search(ctx, state)
                did_break = True
            if state.total < f_best - EPS:
                # a local search walked the current solution below the best
                best = state.clone()
                f_best = state.total
                last_improve = t
                since_improve = 0

            f_new = cand.total
            f_curr = state.total
            accepted = sa_accept(f_new, f_curr, temperature, rng)
            improved_best = False
            if accepted:
                state = cand
                if f_new <= f_best + EPS:
                    best = cand.clone()
                    if f_new < f_best - EPS:
                        f_best = f_new
                        last_improve = t
                        since_improve = 0
                        improved_best = True
            if not improved_best:
                since_improve += 1
            if trace is not None:
                trace.append(TraceRecord(t, removal_name, insertion_name, q,
                                         f_new, accepted, state.total, f_best,
                                         temperature, len(state.bank), did_or,
                                         did_break))
            temperature *= cfg.cooling
        iterations = t

    best_solution = _solution_from_state(ctx, best)
    cost = solution_cost(instance, best_solution)
    return SearchResult(best_solution, cost, iterations, restarts,
                        time.perf_counter() - t_start, f_init, trace)
