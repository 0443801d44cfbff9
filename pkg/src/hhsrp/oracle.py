"""Exact optima for desk-size instances, used to certify the search engine.

brute_force_optimum enumerates every assignment of patients to caregivers or
the bank, every visiting order, and every break placement; it is the ground
truth the engine is checked against. dp_optimum recomputes the optimum by an
independent bitmask dynamic program over (visited set, last patient, break
taken) states so the two exact methods cross-check each other.
"""

from __future__ import annotations

import itertools
import math
import random
import time
from dataclasses import dataclass

from .model import (BEFORE, AFTER, EPS, BreakPlacement, Caregiver, Patient,
                    BreakPolicy, ProblemInstance, RoutePlan, Solution,
                    evaluate_route, route_travel_cost, solution_cost,
                    validate_solution)

MAX_ORACLE_PATIENTS = 7
MAX_ORACLE_CAREGIVERS = 3


@dataclass
class OracleResult:
    cost: float
    solution: Solution
    feasible_count: int     # feasible (assignment, orders, placements) combos
    evaluated_count: int    # timelines evaluated during enumeration
    wall_time: float


def iter_break_placements(n_visits):
    """Every legal placement for a route of the given length: both flags at
    each visit plus the depot-on-arrival slot; a single slot when empty."""
    for pos in range(n_visits):
        yield BreakPlacement(pos, BEFORE)
        yield BreakPlacement(pos, AFTER)
    yield BreakPlacement(n_visits, BEFORE)


def brute_force_optimum(instance, max_patients=MAX_ORACLE_PATIENTS,
                        max_caregivers=MAX_ORACLE_CAREGIVERS):
    """Global optimum by exhaustive enumeration.

    Refuses instances beyond the stated limits: the point is trust, not
    scale. Ordered subsets are enumerated once per caregiver and combined
    over lexicographic assignment vectors (bank first), so ties resolve to
    the first assignment in that order.
    """
    if instance.n > max_patients:
        raise ValueError(f"oracle limited to {max_patients} patients, got {instance.n}")
    if instance.m > max_caregivers:
        raise ValueError(f"oracle limited to {max_caregivers} caregivers, got {instance.m}")
    t0 = time.perf_counter()
    evaluated = 0

    # per caregiver: frozenset of patients -> (best (cost, visits, placement) or None,
    #                                          count of feasible orders x placements)
    tables = []
    for cg in instance.caregivers:
        elig = sorted(cg.eligible)
        table = {}
        for size in range(len(elig) + 1):
            for combo in itertools.combinations(elig, size):
                best = None
                count = 0
                route = RoutePlan(cg.id, [], None)
                for perm in itertools.permutations(combo):
                    route.visits = list(perm)
                    for placement in iter_break_placements(size):
                        route.break_placement = placement
                        evaluated += 1
                        if evaluate_route(instance, route).feasible:
                            count += 1
                            cost = route_travel_cost(instance, route)
                            if best is None or cost < best[0] - EPS:
                                best = (cost, perm, placement)
                table[frozenset(combo)] = (best, count)
        tables.append(table)

    pids = [p.id for p in instance.patients]
    penalties = {p.id: p.penalty for p in instance.patients}
    eligible = [set(cg.eligible) for cg in instance.caregivers]
    m = instance.m

    best_cost = math.inf
    best_assign = None
    feasible_total = 0
    # assignment vector: 0 = bank, k = caregiver index k-1
    for assign in itertools.product(range(m + 1), repeat=instance.n):
        subsets = [[] for _ in range(m)]
        cost = 0.0
        ok = True
        for pid, slot in zip(pids, assign):
            if slot == 0:
                cost += penalties[pid]
            elif pid in eligible[slot - 1]:
                subsets[slot - 1].append(pid)
            else:
                ok = False
                break
        if not ok:
            continue
        combos = 1
        for k in range(m):
            entry, count = tables[k][frozenset(subsets[k])]
            if entry is None:
                combos = 0
                break
            cost += entry[0]
        if combos == 0:
            continue
        for k in range(m):
            combos *= tables[k][frozenset(subsets[k])][1]
        feasible_total += combos
        if cost < best_cost - EPS:
            best_cost = cost
            best_assign = assign

    routes = []
    bank = set(pids)
    for k, cg in enumerate(instance.caregivers):
        chosen = frozenset(pid for pid, slot in zip(pids, best_assign) if slot == k + 1)
        entry, _count = tables[k][chosen]
        if chosen:
            routes.append(RoutePlan(cg.id, list(entry[1]), entry[2]))
            bank -= chosen
        else:
            routes.append(RoutePlan(cg.id, [], BreakPlacement(0, BEFORE)))
    solution = Solution(routes, bank)
    return OracleResult(best_cost, solution, feasible_total, evaluated,
                        time.perf_counter() - t0)


def dp_optimum(instance):
    """Optimum recomputed independently: per-caregiver dynamic program over
    (visited mask, last patient, break taken) with Pareto (cost, ready-time)
    states, combined over all assignment vectors. Returns the cost only."""
    t = instance.travel_time
    ct = instance.travel_cost
    bp = instance.break_policy
    pat = instance.patient_by_id

    per_cg = []
    for cg in instance.caregivers:
        elig = sorted(cg.eligible)
        e = len(elig)
        L = cg.max_working_time

        def push(store, key, cost, ready):
            pareto = store.setdefault(key, [])
            for c0, r0 in pareto:
                if c0 <= cost + 1e-12 and r0 <= ready + 1e-12:
                    return
            pareto[:] = [(c0, r0) for c0, r0 in pareto
                         if not (cost <= c0 and ready <= r0)]
            pareto.append((cost, ready))

        states = {}
        # transitions out of the depot at time 0
        for j, pid in enumerate(elig):
            p = pat[pid]
            arrival = t[0][pid]
            cost = ct[0][pid]
            start = max(arrival, p.tw_open)
            if start <= p.tw_close + EPS:
                push(states, (1 << j, j, 0), cost, start + p.duration)
                bs = max(start + p.duration, bp.window_open)
                if bs <= bp.window_close + EPS:
                    push(states, (1 << j, j, 1), cost, bs + bp.duration)
            bs = max(arrival, bp.window_open)
            if bs <= bp.window_close + EPS:
                start = max(bs + bp.duration, p.tw_open)
                if start <= p.tw_close + EPS:
                    push(states, (1 << j, j, 1), cost, start + p.duration)

        for mask in range(1, 1 << e):
            for j in range(e):
                if not mask & (1 << j):
                    continue
                for taken in (0, 1):
                    pareto = states.get((mask, j, taken))
                    if not pareto:
                        continue
                    last = elig[j]
                    for nj in range(e):
                        if mask & (1 << nj):
                            continue
                        pid = elig[nj]
                        p = pat[pid]
                        nmask = mask | (1 << nj)
                        for cost, ready in pareto:
                            arrival = ready + t[last][pid]
                            ncost = cost + ct[last][pid]
                            start = max(arrival, p.tw_open)
                            if start <= p.tw_close + EPS:
                                push(states, (nmask, nj, taken), ncost,
                                     start + p.duration)
                                if taken == 0:
                                    bs = max(start + p.duration, bp.window_open)
                                    if bs <= bp.window_close + EPS:
                                        push(states, (nmask, nj, 1), ncost,
                                             bs + bp.duration)
                            if taken == 0:
                                bs = max(arrival, bp.window_open)
                                if bs <= bp.window_close + EPS:
                                    start = max(bs + bp.duration, p.tw_open)
                                    if start <= p.tw_close + EPS:
                                        push(states, (nmask, nj, 1), ncost,
                                             start + p.duration)

        finish = {}
        # empty route: break at the depot
        if max(0.0, bp.window_open) + bp.duration <= L + EPS:
            finish[0] = 0.0
        for (mask, j, taken), pareto in states.items():
            last = elig[j]
            for cost, ready in pareto:
                arrival = ready + t[last][0]
                total = cost + ct[last][0]
                if taken:
                    back = arrival
                else:
                    bs = max(arrival, bp.window_open)
                    if bs > bp.window_close + EPS:
                        continue
                    back = bs + bp.duration
                if back <= L + EPS and total < finish.get(mask, math.inf) - 1e-12:
                    finish[mask] = total
        per_cg.append((elig, finish))

    pids = [p.id for p in instance.patients]
    penalties = {p.id: p.penalty for p in instance.patients}
    best = math.inf
    for assign in itertools.product(range(instance.m + 1), repeat=instance.n):
        cost = 0.0
        masks = [0] * instance.m
        ok = True
        for pid, slot in zip(pids, assign):
            if slot == 0:
                cost += penalties[pid]
                continue
            elig, _finish = per_cg[slot - 1]
            try:
                masks[slot - 1] |= 1 << elig.index(pid)
            except ValueError:
                ok = False
                break
        if not ok:
            continue
        for k in range(instance.m):
            sub = per_cg[k][1].get(masks[k])
            if sub is None:
                ok = False
                break
            cost += sub
        if ok and cost < best:
            best = cost
    return best


@dataclass
class CertifyResult:
    passed: bool
    solution_cost: float
    optimum: float
    gap: float
    message: str = ""


def certify(instance, solution, tolerance=1e-6):
    """PASS iff the solution is validator-clean and matches the brute-force
    optimum within tolerance. A cost below the optimum also fails: that
    means one of the two sides is broken."""
    report = validate_solution(instance, solution)
    cost = solution_cost(instance, solution).total
    result = brute_force_optimum(instance)
    gap = cost - result.cost
    if not report.ok:
        codes = ", ".join(sorted(report.codes()))
        return CertifyResult(False, cost, result.cost, gap,
                             f"solution violates constraints: {codes}")
    if gap > tolerance:
        return CertifyResult(False, cost, result.cost, gap,
                             f"solution is {gap:.6g} above the optimum")
    if gap < -tolerance:
        return CertifyResult(False, cost, result.cost, gap,
                             "solution beats the oracle optimum; oracle or "
                             "validator defect")
    return CertifyResult(True, cost, result.cost, gap,
                         f"solution matches the optimum (gap {gap:.3g}, "
                         f"tolerance {tolerance:g})")


def random_tiny_instance(seed, n_min=4, n_max=6, n_caregivers=2):
    """Desk-size random instance family (the published acceptance family is
    seeds 0..99 with the defaults). Euclidean exact distances, shift of 600
    with a mid-day break, mixed window widths, mostly-open eligibility."""
    rng = random.Random(seed)
    n = rng.randint(n_min, n_max)
    depot = (25.0, 25.0)
    coords = [(rng.uniform(0, 50), rng.uniform(0, 50)) for _ in range(n)]
    nodes = [depot] + coords
    size = n + 1
    tt = [[math.dist(nodes[i], nodes[j]) for j in range(size)] for i in range(size)]
    patients = []
    for i in range(1, n + 1):
        a = rng.uniform(0.0, 300.0)
        b = a + rng.uniform(60.0, 250.0)
        patients.append(Patient(
            id=i,
            duration=rng.uniform(5.0, 20.0),
            tw_open=a,
            tw_close=b,
            penalty=float(rng.choice((600, 1000, 1400))),
            x=coords[i - 1][0],
            y=coords[i - 1][1],
        ))
    eligible = {cid: set() for cid in range(1, n_caregivers + 1)}
    for p in patients:
        if rng.random() < 0.75:
            for cid in eligible:
                eligible[cid].add(p.id)
        else:
            eligible[rng.randint(1, n_caregivers)].add(p.id)
    caregivers = [Caregiver(cid, 600.0, frozenset(eligible[cid]))
                  for cid in range(1, n_caregivers + 1)]
    brk = BreakPolicy(duration=float(rng.choice((30, 45, 60))),
                      window_open=150.0, window_close=330.0)
    return ProblemInstance(f"tiny-{seed}", patients, caregivers, brk,
                           travel_time=tt, depot_xy=depot,
                           distance_convention="euclidean_exact")
