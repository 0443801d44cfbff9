"""Release gate: one test per published acceptance criterion.

Each test reports a single PASS/FAIL line (echoed again in the terminal
summary) with the measured numbers, then asserts the stated tolerance.
Budgeted wall times assume a cold numba cache is already warmed by the
unit tests; a fully cold run adds one-off JIT compilation.
"""

import math
import random
import time

import pytest

from conftest import validator_base_instance, validator_fixtures
from hhsrp import alns, bench
from hhsrp.alns import SearchConfig, init_temperature, sa_accept
from hhsrp.instances import generate_covid_style
from hhsrp.model import (BEFORE, BreakPlacement, RoutePlan, Solution,
                         evaluate_route, solution_cost, validate_solution)
from hhsrp.oracle import (brute_force_optimum, iter_break_placements,
                          random_tiny_instance)

_LINES = []


def _report(criterion, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} {criterion}: {detail}"
    _LINES.append(line)
    print(line)


# ---------------------------------------------------------------------------
# 1. search matches the exact optimum on the published tiny family


def test_criterion_1_oracle_optimality():
    """Seeds 0..99 of random_tiny_instance, best of three search seeds at
    theta=2000/theta_bar=200, >= 95/100 exact matches, all runs clean,
    under two minutes."""
    t0 = time.perf_counter()
    matches = 0
    clean = 0
    for seed in range(100):
        inst = random_tiny_instance(seed)
        opt = brute_force_optimum(inst)
        best = math.inf
        ok = True
        for s in (0, 1, 2):
            res = alns.run(inst, SearchConfig(seed=s, theta=2000,
                                              theta_bar=200))
            ok = ok and validate_solution(inst, res.best).ok
            best = min(best, res.cost.total)
        clean += ok
        if abs(best - opt.cost) <= 1e-6:
            matches += 1
    wall = time.perf_counter() - t0
    passed = matches >= 95 and clean == 100 and wall < 120.0
    _report("criterion 1 (oracle optimality)", passed,
            f"{matches}/100 optimal (need >= 95), {clean}/100 validator-clean, "
            f"{wall:.1f}s (budget 120s)")
    assert matches >= 95
    assert clean == 100
    assert wall < 120.0


# ---------------------------------------------------------------------------
# 2. benchmark reproduction (conditional)


def test_criterion_2_reference_machinery():
    """The published Solomon-derived instance files are not distributed and
    are absent here, so this criterion is replaced by criteria 1 and 6 per
    its own fallback clause. What must still hold: the reference table and
    the import/bench pipeline those files would flow through."""
    table = bench.load_reference()
    spot = {
        "C101_30": (1383.0, 1),
        "R101_30": (11379.0, 11),
        "RC102_50": (14837.0, 15),
        "C104_50": (637.0, 0),
        "C101_100": (19273.0, 17),
    }
    rows_ok = len(table) == 168
    spots_ok = all(table[k] == v for k, v in spot.items())
    na_ok = sum(1 for ref, _ in table.values() if ref is None) == 7
    passed = rows_ok and spots_ok and na_ok
    _report("criterion 2 (benchmark reproduction)", passed,
            "replaced by criteria 1 and 6 (instance files unavailable); "
            f"reference table intact: {len(table)} rows, "
            f"{sum(1 for r, _ in table.values() if r is None)} NA entries, "
            "spot values verified")
    assert rows_ok and spots_ok and na_ok


# ---------------------------------------------------------------------------
# 3. simulated-annealing mechanics


def test_criterion_3_sa_mechanics():
    rng = random.Random(7)
    trials = 10 ** 5
    freq_err = 0.0
    for ratio in (0.5, 1.0, 2.0):
        hits = sum(sa_accept(100.0 + ratio, 100.0, 1.0, rng)
                   for _ in range(trials))
        freq_err = max(freq_err, abs(hits / trials - math.exp(-ratio)))

    t_start = init_temperature(1000.0, 0.05)
    t_start_err = abs(t_start - 72.1348)

    cfg = SearchConfig(seed=3, theta=1200, theta_bar=100, collect_trace=True)
    res = alns.run(random_tiny_instance(5), cfg)
    t0 = res.trace[0].temperature
    # one record per iteration, temperature logged before the cooling step
    traj_err = max(abs(t.temperature - t0 * cfg.cooling ** (t.iteration - 1)) /
                   (t0 * cfg.cooling ** (t.iteration - 1))
                   for t in res.trace)

    passed = freq_err <= 0.01 and t_start_err <= 1e-3 and traj_err <= 1e-9
    _report("criterion 3 (SA mechanics)", passed,
            f"max acceptance-frequency error {freq_err:.4f} (tol 0.01), "
            f"T_start(1000, 0.05) err {t_start_err:.2e} (tol 1e-3), "
            f"cooling trajectory rel err {traj_err:.2e} (tol 1e-9)")
    assert freq_err <= 0.01
    assert t_start_err <= 1e-3
    assert traj_err <= 1e-9


# ---------------------------------------------------------------------------
# 4. local-search contracts


def _exhaustive_best_return(inst, cid, visits):
    best = None
    for placement in iter_break_placements(len(visits)):
        tl = evaluate_route(inst, RoutePlan(cid, list(visits), placement))
        if tl.feasible and (best is None or tl.depot_return < best):
            best = tl.depot_return
    return best


def test_criterion_4_local_search_contracts():
    rng = random.Random(11)

    # break placement: engine result equals the exhaustive minimum
    mismatches = 0
    routes_checked = 0
    while routes_checked < 1000:
        inst = random_tiny_instance(rng.randrange(500))
        k = rng.randint(1, min(6, inst.n))
        visits = rng.sample([p.id for p in inst.patients], k)
        cid = rng.choice([c.id for c in inst.caregivers])
        best = _exhaustive_best_return(inst, cid, visits)
        if best is None:
            continue
        feasible = [pl for pl in iter_break_placements(k)
                    if evaluate_route(
                        inst, RoutePlan(cid, list(visits), pl)).feasible]
        start = rng.choice(feasible)
        sol = Solution(
            routes=[RoutePlan(c.id, list(visits) if c.id == cid else [],
                              start if c.id == cid
                              else BreakPlacement(0, BEFORE))
                    for c in inst.caregivers],
            bank=set(p.id for p in inst.patients) - set(visits))
        improved = alns.break_local_search(inst, sol)
        tl = evaluate_route(inst, improved.route_for(cid))
        if not tl.feasible or abs(tl.depot_return - best) > 1e-9:
            mismatches += 1
        routes_checked += 1

    # or-opt: cost never increases, visits are conserved
    or_opt_violations = 0
    applications = 0
    seed = 0
    while applications < 10 ** 4:
        inst = random_tiny_instance(seed % 500)
        sol = alns.build_initial(inst, random.Random(seed))
        before = solution_cost(inst, sol).total
        multiset_before = sorted(v for r in sol.routes for v in r.visits)
        after_sol = alns.or_opt(inst, sol)
        after = solution_cost(inst, after_sol).total
        multiset_after = sorted(v for r in after_sol.routes for v in r.visits)
        if after > before + 1e-9 or multiset_before != multiset_after \
                or sol.bank != after_sol.bank:
            or_opt_violations += 1
        seed += 1
        applications += 1

    passed = mismatches == 0 and or_opt_violations == 0
    _report("criterion 4 (local-search contracts)", passed,
            f"break search: {mismatches}/1000 mismatches vs exhaustive "
            f"(need 0); or-opt: {or_opt_violations}/{applications} "
            "cost-increase or multiset violations (need 0)")
    assert mismatches == 0
    assert or_opt_violations == 0


# ---------------------------------------------------------------------------
# 5. validator completeness


def test_criterion_5_validator_completeness():
    inst = validator_base_instance()
    fixtures = validator_fixtures()
    wrong = []
    for code, broken, repaired in fixtures:
        got = validate_solution(inst, broken).codes()
        if got != {code}:
            wrong.append((code, got))
        if not validate_solution(inst, repaired).ok:
            wrong.append((code, "repaired twin rejected"))
    passed = len(fixtures) == 12 and not wrong
    _report("criterion 5 (validator completeness)", passed,
            f"{len(fixtures)} broken solutions each rejected with exactly "
            f"its own code and each repaired twin accepted"
            + (f"; failures: {wrong}" if wrong else ""))
    assert len(fixtures) == 12
    assert not wrong


# ---------------------------------------------------------------------------
# 6. robustness on generated pandemic-style instances


def test_criterion_6_generated_robustness():
    """Ten 50-patient generator instances, five replications each, at the
    reduced budget theta=4000/theta_bar=400 (calibrated to the 5-minute
    wall budget; see the benchmark docs). Gap1 = 100*(avg-best)/best must
    average <= 1.5% and never reach 4%."""
    t0 = time.perf_counter()
    instances = [generate_covid_style(50, 5, seed=s) for s in range(10)]
    spec = bench.ExperimentSpec(
        instances=[i.name for i in instances], replications=5,
        overrides={"theta": 4000, "theta_bar": 400})
    records = bench.run_experiment(spec, instances=instances)
    rows = bench.summarize(records)
    wall = time.perf_counter() - t0
    gaps = [r["gap1"] for r in rows]
    avg_gap = sum(gaps) / len(gaps)
    max_gap = max(gaps)
    passed = avg_gap <= 1.5 and max_gap < 4.0 and wall <= 300.0
    _report("criterion 6 (generated robustness)", passed,
            f"avg Gap1 {avg_gap:.3f}% (tol 1.5%), max {max_gap:.3f}% "
            f"(tol < 4%), {len(records)} runs in {wall:.1f}s (budget 300s)")
    assert avg_gap <= 1.5
    assert max_gap < 4.0
    assert wall <= 300.0


# ---------------------------------------------------------------------------
# 7. variant gating and determinism


def test_criterion_7_variants_and_determinism():
    inst = generate_covid_style(20, 3, seed=4)
    gating_ok = True
    gating_detail = []
    for variant, want_or, want_break in (("A0", True, True),
                                         ("A1", False, True),
                                         ("A2", True, False),
                                         ("A3", False, False)):
        cfg = SearchConfig.for_variant(variant, seed=2, theta=700,
                                       theta_bar=120, collect_trace=True)
        res = alns.run(inst, cfg)
        saw_or = any(t.or_opt for t in res.trace)
        saw_break = any(t.break_search for t in res.trace)
        ok = saw_or == want_or and saw_break == want_break
        gating_ok = gating_ok and ok
        gating_detail.append(f"{variant}:or={saw_or},break={saw_break}")

    cfg = SearchConfig.for_variant("A0", seed=9, theta=700, theta_bar=120,
                                   collect_trace=True)
    r1 = alns.run(inst, cfg)
    r2 = alns.run(inst, cfg)
    same_cost = r1.cost.total == r2.cost.total
    same_trace = [(t.iteration, t.removal, t.insertion, t.q, t.f_new,
                   t.accepted, t.f_best) for t in r1.trace] == \
                 [(t.iteration, t.removal, t.insertion, t.q, t.f_new,
                   t.accepted, t.f_best) for t in r2.trace]

    passed = gating_ok and same_cost and same_trace
    _report("criterion 7 (variant gating and determinism)", passed,
            f"gating {' '.join(gating_detail)}; repeat run: "
            f"identical cost {same_cost}, identical trace {same_trace}")
    assert gating_ok
    assert same_cost and same_trace
