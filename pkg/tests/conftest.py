"""Shared fixtures: tiny hand-checkable instances and validator fixture pairs.

Numbers quoted in the tests that use these instances were propagated by hand
from the matrices and windows below; they are frozen expectations, not
recordings of implementation output.
"""

import pytest

from hhsrp.model import (AFTER, BEFORE, BreakPlacement, BreakPolicy, Caregiver,
                         Patient, ProblemInstance, RoutePlan, Solution,
                         V_BREAK_MISSING, V_BREAK_POSITION, V_BREAK_WINDOW,
                         V_DUPLICATE_ACROSS_ROUTES, V_DUPLICATE_IN_ROUTE,
                         V_ELIGIBILITY, V_MISSING_PATIENT, V_ROUTE_SET,
                         V_ROUTED_AND_BANKED, V_TIME_WINDOW, V_UNKNOWN_PATIENT,
                         V_WORKING_TIME)


def pytest_terminal_summary(terminalreporter):
    """Echo the one-line acceptance verdicts after the test summary."""
    try:
        import test_acceptance
    except ImportError:
        return
    lines = getattr(test_acceptance, "_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.line(line)


def make_instance(tt, durations, windows, *, break_policy=(15.0, 20.0, 50.0),
                  max_work=200.0, n_caregivers=1, eligible=None,
                  penalty=1000.0, ct=None, name="fx"):
    """Terse instance builder; windows is a list of (open, close)."""
    patients = [Patient(i + 1, durations[i], windows[i][0], windows[i][1], penalty)
                for i in range(len(durations))]
    all_ids = frozenset(p.id for p in patients)
    if isinstance(max_work, (int, float)):
        max_work = [max_work] * n_caregivers
    caregivers = []
    for k in range(n_caregivers):
        elig = all_ids if eligible is None else frozenset(eligible[k])
        caregivers.append(Caregiver(k + 1, max_work[k], elig))
    return ProblemInstance(name, patients, caregivers,
                           BreakPolicy(*break_policy), travel_time=tt,
                           travel_cost=ct, distance_convention="explicit_matrix")


@pytest.fixture
def two_patient_instance():
    """p1 near, wide window; p2 far, window [40, 80]; break 15 in [20, 50].

    Hand-propagated timelines for route [1, 2] under every break placement:
      (0, before): starts [35, 57], break 20, return 75
      (0, after):  starts [5, 47],  break 20, return 65
      (1, before): starts [5, 42],  break 27, return 60   <- best return
      (1, after):  starts [5, 40],  break 45, return 73
      (2, depot):  depot arrival 58 > window close 50 -> infeasible
    """
    return make_instance(
        tt=[[0.0, 5.0, 13.0], [5.0, 0.0, 12.0], [13.0, 12.0, 0.0]],
        durations=[10.0, 5.0],
        windows=[(0.0, 100.0), (40.0, 80.0)],
        break_policy=(15.0, 20.0, 50.0),
        max_work=200.0)


@pytest.fixture
def spec_example_instance():
    """Single patient 10 minutes out, window opening at 30; break 15 in [0, 100]."""
    return make_instance(
        tt=[[0.0, 10.0], [10.0, 0.0]],
        durations=[20.0],
        windows=[(30.0, 100.0)],
        break_policy=(15.0, 0.0, 100.0),
        max_work=600.0)


def _route(cid, visits, pos, flag=BEFORE):
    return RoutePlan(cid, list(visits), BreakPlacement(pos, flag))


def validator_base_instance():
    """Three patients, two caregivers; caregiver 2 has less shift and may not
    serve patient 3. Patient 2 opens late (150), patient 3 closes early (45)."""
    return make_instance(
        tt=[[0.0, 10.0, 20.0, 30.0],
            [10.0, 0.0, 12.0, 22.0],
            [20.0, 12.0, 0.0, 14.0],
            [30.0, 22.0, 14.0, 0.0]],
        durations=[10.0, 10.0, 10.0],
        windows=[(0.0, 500.0), (150.0, 500.0), (0.0, 45.0)],
        break_policy=(30.0, 60.0, 120.0),
        max_work=[240.0, 175.0],
        n_caregivers=2,
        eligible=[(1, 2, 3), (1, 2)],
        name="validator-base")


def validator_fixtures():
    """(code, broken Solution, repaired Solution) triples, one per violation
    class, engineered so exactly one code fires on the broken twin."""
    empty2 = _route(2, [], 0)
    cases = [
        (V_DUPLICATE_IN_ROUTE,
         Solution([_route(1, [1, 1], 2), empty2], {2, 3}),
         Solution([_route(1, [1], 1), empty2], {2, 3})),
        (V_DUPLICATE_ACROSS_ROUTES,
         Solution([_route(1, [1], 1), _route(2, [1], 1)], {2, 3}),
         Solution([_route(1, [1], 1), empty2], {2, 3})),
        (V_ROUTED_AND_BANKED,
         Solution([_route(1, [1], 1), empty2], {1, 2, 3}),
         Solution([_route(1, [1], 1), empty2], {2, 3})),
        (V_MISSING_PATIENT,
         Solution([_route(1, [1], 1), empty2], {3}),
         Solution([_route(1, [1], 1), empty2], {2, 3})),
        (V_UNKNOWN_PATIENT,
         Solution([_route(1, [9], 1), empty2], {1, 2, 3}),
         Solution([_route(1, [], 0), empty2], {1, 2, 3})),
        (V_ROUTE_SET,
         Solution([_route(1, [], 0)], {1, 2, 3}),
         Solution([_route(1, [], 0), empty2], {1, 2, 3})),
        (V_BREAK_MISSING,
         Solution([RoutePlan(1, [], None), empty2], {1, 2, 3}),
         Solution([_route(1, [], 0), empty2], {1, 2, 3})),
        (V_BREAK_POSITION,
         Solution([_route(1, [1], 5), empty2], {2, 3}),
         Solution([_route(1, [1], 1), empty2], {2, 3})),
        # [1,2,3]: p3 service would start at 56 > 45
        (V_TIME_WINDOW,
         Solution([_route(1, [1, 2, 3], 3), empty2], set()),
         Solution([_route(1, [1, 3], 2), empty2], {2})),
        # after serving p2 (starts 150) the break would start at 160 > 120;
        # repaired twin moves the visit to caregiver 1, whose shift fits
        # the break-first schedule (return 180 <= 240)
        (V_BREAK_WINDOW,
         Solution([_route(1, [], 0), _route(2, [2], 0, AFTER)], {1, 3}),
         Solution([_route(1, [2], 0, BEFORE), empty2], {1, 3})),
        # caregiver 2: break 60-90, serve p2 150-160, return 180 > L=175
        (V_WORKING_TIME,
         Solution([_route(1, [], 0), _route(2, [2], 0, BEFORE)], {1, 3}),
         Solution([_route(1, [2], 0, BEFORE), empty2], {1, 3})),
        # p3 is not in caregiver 2's eligible set (timeline itself is fine)
        (V_ELIGIBILITY,
         Solution([_route(1, [], 0), _route(2, [3], 1)], {1, 2}),
         Solution([_route(1, [3], 1), empty2], {1, 2})),
    ]
    return cases
