"""Problem model for home-healthcare scheduling and routing with lunch breaks.

A problem instance has n patients with hard time windows, m caregivers with a
maximum working time and per-caregiver eligibility sets, and one mandatory
lunch break per caregiver that must start inside the break window. A solution
assigns each patient to exactly one caregiver route or to the request bank;
its cost is total travel cost plus one penalty per banked patient.

This module is the readable reference implementation of the timeline
semantics. The search engine uses compiled twins of these routines (see
kernels.py); agreement between the two is covered by tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

EPS = 1e-6  # tolerance for all <= comparisons on times and costs

BEFORE = "before"  # break starts on arrival at the host patient, before service
AFTER = "after"    # break starts right after service at the host patient
DEPOT = -1         # pseudo host id for a break taken at the depot before returning

# Violation codes emitted by validate_solution, one per constraint class.
V_DUPLICATE_IN_ROUTE = "duplicate_in_route"
V_DUPLICATE_ACROSS_ROUTES = "duplicate_across_routes"
V_ROUTED_AND_BANKED = "routed_and_banked"
V_MISSING_PATIENT = "missing_patient"
V_UNKNOWN_PATIENT = "unknown_patient"
V_ROUTE_SET = "route_set"
V_BREAK_MISSING = "break_missing"
V_BREAK_POSITION = "break_position"
V_TIME_WINDOW = "time_window"
V_BREAK_WINDOW = "break_window"
V_WORKING_TIME = "working_time"
V_ELIGIBILITY = "eligibility"

ALL_VIOLATION_CODES = (
    V_DUPLICATE_IN_ROUTE, V_DUPLICATE_ACROSS_ROUTES, V_ROUTED_AND_BANKED,
    V_MISSING_PATIENT, V_UNKNOWN_PATIENT, V_ROUTE_SET, V_BREAK_MISSING,
    V_BREAK_POSITION, V_TIME_WINDOW, V_BREAK_WINDOW, V_WORKING_TIME,
    V_ELIGIBILITY,
)


@dataclass(frozen=True)
class Patient:
    """One patient: id is the node index (1..n) in the travel matrices."""

    id: int
    duration: float          # service duration, minutes
    tw_open: float           # earliest service start
    tw_close: float          # latest service start
    penalty: float = 1000.0  # cost of leaving the patient unvisited
    x: float | None = None   # coordinates are optional (matrix-only instances)
    y: float | None = None


@dataclass(frozen=True)
class Caregiver:
    id: int
    max_working_time: float        # shift length L; route must return by L
    eligible: frozenset[int]       # patient ids this caregiver may serve


@dataclass(frozen=True)
class BreakPolicy:
    """Mandatory lunch break: fixed duration, start inside [window_open, window_close]."""

    duration: float
    window_open: float
    window_close: float


class ProblemInstance:
    """Immutable problem data: patients, caregivers, break policy, matrices.

    travel_time[u][v] and travel_cost[u][v] are (n+1) x (n+1) with node 0 the
    depot and node i patient i. travel_cost defaults to travel_time.
    """

    def __init__(self, name, patients, caregivers, break_policy,
                 travel_time, travel_cost=None, depot_xy=None,
                 distance_convention="euclidean_exact"):
        self.name = name
        self.patients = list(patients)
        self.caregivers = list(caregivers)
        self.break_policy = break_policy
        self.depot_xy = depot_xy
        self.distance_convention = distance_convention
        self.n = len(self.patients)
        self.m = len(self.caregivers)

        ids = [p.id for p in self.patients]
        if sorted(ids) != list(range(1, self.n + 1)):
            raise ValueError("patient ids must be exactly 1..n")
        self.patients.sort(key=lambda p: p.id)
        cids = [c.id for c in self.caregivers]
        if len(set(cids)) != self.m or any(c <= 0 for c in cids):
            raise ValueError("caregiver ids must be unique positive integers")
        self.caregivers.sort(key=lambda c: c.id)
        self.patient_by_id = {p.id: p for p in self.patients}
        self.caregiver_by_id = {c.id: c for c in self.caregivers}

        self.travel_time = [[float(x) for x in row] for row in travel_time]
        if travel_cost is None:
            self.travel_cost = [row[:] for row in self.travel_time]
        else:
            self.travel_cost = [[float(x) for x in row] for row in travel_cost]
        for mat, label in ((self.travel_time, "travel_time"),
                           (self.travel_cost, "travel_cost")):
            if len(mat) != self.n + 1 or any(len(r) != self.n + 1 for r in mat):
                raise ValueError(f"{label} must be ({self.n + 1})x({self.n + 1})")
            for i, row in enumerate(mat):
                for j, v in enumerate(row):
                    if not math.isfinite(v) or v < 0:
                        raise ValueError(f"{label}[{i}][{j}] must be finite and >= 0")
                if abs(mat[i][i]) > EPS:
                    raise ValueError(f"{label} diagonal must be 0")

        for p in self.patients:
            if p.tw_open > p.tw_close + EPS:
                raise ValueError(f"patient {p.id}: tw_open > tw_close")
            if p.duration < 0 or p.penalty < 0:
                raise ValueError(f"patient {p.id}: negative duration or penalty")
        bp = self.break_policy
        if bp.duration < 0 or bp.window_open > bp.window_close + EPS:
            raise ValueError("invalid break policy")
        known = set(ids)
        for c in self.caregivers:
            if c.max_working_time < 0:
                raise ValueError(f"caregiver {c.id}: negative max working time")
            if not set(c.eligible) <= known:
                raise ValueError(f"caregiver {c.id}: eligibility references unknown patients")
            # every caregiver owes one break even on an empty route
            if max(0.0, bp.window_open) + bp.duration > c.max_working_time + EPS:
                raise ValueError(
                    f"caregiver {c.id}: break cannot fit in the shift "
                    "(window_open + duration > max working time)")

    @property
    def max_travel_time(self):
        return max(max(row) for row in self.travel_time)

    @property
    def max_travel_cost(self):
        return max(max(row) for row in self.travel_cost)

    def eligible_caregivers(self, patient_id):
        return [c.id for c in self.caregivers if patient_id in c.eligible]


@dataclass(frozen=True)
class BreakPlacement:
    """Where a route takes its break.

    position indexes the visit sequence: 0 = at the first visited patient,
    len(visits) = at the depot on arrival, before closing the route. flag is
    BEFORE (break on arrival, before service) or AFTER (right after service)
    and is meaningful only for position < len(visits).
    """

    position: int
    flag: str = BEFORE


@dataclass
class RoutePlan:
    caregiver_id: int
    visits: list[int] = field(default_factory=list)
    break_placement: BreakPlacement | None = BreakPlacement(0, BEFORE)

    def copy(self):
        return RoutePlan(self.caregiver_id, list(self.visits), self.break_placement)


@dataclass
class Solution:
    """Route plans plus the request bank of unvisited patient ids."""

    routes: list[RoutePlan]
    bank: set[int] = field(default_factory=set)

    def copy(self):
        return Solution([r.copy() for r in self.routes], set(self.bank))

    def route_for(self, caregiver_id):
        for r in self.routes:
            if r.caregiver_id == caregiver_id:
                return r
        raise KeyError(caregiver_id)


@dataclass
class ScheduleTimeline:
    """Forward-propagated schedule of one route.

    On infeasibility, violation carries the first violated constraint code
    and values beyond that point are unspecified.
    """

    feasible: bool
    service_starts: list[float]
    break_start: float | None
    depot_return: float | None
    violation: str | None = None
    violation_at: int | None = None  # visit position, or len(visits) for the depot leg


@dataclass(frozen=True)
class CostBreakdown:
    travel: float
    penalty: float

    @property
    def total(self):
        return self.travel + self.penalty


@dataclass(frozen=True)
class Violation:
    code: str
    caregiver_id: int | None = None
    patient_id: int | None = None
    detail: str = ""


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def codes(self):
        return {v.code for v in self.violations}


def evaluate_route(instance, route):
    """Forward-propagate one route's schedule with earliest starts.

    The caregiver leaves the depot at time 0, waits when early (for patient
    windows and for the break window), and is infeasible on the first late
    service start, late break start, or depot return after L.
    """
    t = instance.travel_time
    bp = instance.break_policy
    cg = instance.caregiver_by_id[route.caregiver_id]
    placement = route.break_placement
    visits = route.visits
    nv = len(visits)
    starts = []

    def fail(code, at):
        return ScheduleTimeline(False, starts, break_start, depot_return=None,
                                violation=code, violation_at=at)

    break_start = None
    now = 0.0
    loc = 0
    for pos, pid in enumerate(visits):
        p = instance.patient_by_id[pid]
        arrival = now + t[loc][pid]
        if placement is not None and placement.position == pos and placement.flag == BEFORE:
            bs = max(arrival, bp.window_open)
            if bs > bp.window_close + EPS:
                break_start = bs
                return fail(V_BREAK_WINDOW, pos)
            break_start = bs
            start = max(bs + bp.duration, p.tw_open)
        else:
            start = max(arrival, p.tw_open)
        if start > p.tw_close + EPS:
            return fail(V_TIME_WINDOW, pos)
        starts.append(start)
        now = start + p.duration
        if placement is not None and placement.position == pos and placement.flag == AFTER:
            bs = max(now, bp.window_open)
            if bs > bp.window_close + EPS:
                break_start = bs
                return fail(V_BREAK_WINDOW, pos)
            break_start = bs
            now = bs + bp.duration
        loc = pid

    arrival = now + t[loc][0]
    if placement is not None and placement.position == nv:
        bs = max(arrival, bp.window_open)
        if bs > bp.window_close + EPS:
            break_start = bs
            return fail(V_BREAK_WINDOW, nv)
        break_start = bs
        depot_return = bs + bp.duration
    else:
        depot_return = arrival
    if depot_return > cg.max_working_time + EPS:
        return ScheduleTimeline(False, starts, break_start, depot_return,
                                violation=V_WORKING_TIME, violation_at=nv)
    return ScheduleTimeline(True, starts, break_start, depot_return)


def route_travel_cost(instance, route):
    """Sum of arc costs depot -> visits -> depot; 0 for an empty route."""
    ct = instance.travel_cost
    loc = 0
    total = 0.0
    for pid in route.visits:
        total += ct[loc][pid]
        loc = pid
    return total + ct[loc][0]


def solution_cost(instance, solution):
    travel = sum(route_travel_cost(instance, r) for r in solution.routes)
    penalty = sum(instance.patient_by_id[pid].penalty for pid in solution.bank)
    return CostBreakdown(travel, penalty)


@dataclass(frozen=True)
class InsertionEvaluation:
    feasible: bool
    cost_delta: float                    # travel-cost increase of the modified route
    break_placement: BreakPlacement | None  # placement for the route after insertion
    depot_return: float | None


def insertion_delta(instance, route, patient_id, slot):
    """Evaluate inserting patient_id at the given slot of a route.

    Break re-placements tried: the incumbent placement (positions shifted
    past the slot) plus before-service and after-service at the inserted
    patient. Among feasible candidates the one with the smallest depot
    return wins; the penalty change of un-banking the patient is the
    caller's business. Eligibility is not checked here.
    """
    visits = route.visits
    nv = len(visits)
    if not 0 <= slot <= nv:
        raise ValueError(f"slot {slot} out of range for route of length {nv}")
    new_visits = visits[:slot] + [patient_id] + visits[slot:]
    ct = instance.travel_cost
    prev = visits[slot - 1] if slot > 0 else 0
    nxt = visits[slot] if slot < nv else 0
    delta = ct[prev][patient_id] + ct[patient_id][nxt] - ct[prev][nxt]

    candidates = []
    inc = route.break_placement
    if inc is not None:
        pos = inc.position if inc.position < slot else inc.position + 1
        candidates.append(BreakPlacement(pos, inc.flag))
    candidates.append(BreakPlacement(slot, BEFORE))
    candidates.append(BreakPlacement(slot, AFTER))

    best = None
    best_return = math.inf
    trial = RoutePlan(route.caregiver_id, new_visits, None)
    for cand in candidates:
        trial.break_placement = cand
        tl = evaluate_route(instance, trial)
        if tl.feasible and tl.depot_return < best_return - EPS:
            best = cand
            best_return = tl.depot_return
    if best is None:
        return InsertionEvaluation(False, math.inf, None, None)
    return InsertionEvaluation(True, delta, best, best_return)


def insert_visit(route, slot, patient_id, placement):
    """Apply an insertion; placement is the full new-route placement."""
    route.visits.insert(slot, patient_id)
    route.break_placement = placement


def remove_visit_at(route, index):
    """Remove the visit at index and re-anchor the break.

    The break keeps its host when the host survives; a break hosted by the
    removed patient re-anchors before the node that slides into its
    position (the successor, or the depot when the last visit goes).
    Feasibility of the result is the caller's to re-check.
    """
    pid = route.visits.pop(index)
    bp = route.break_placement
    if bp is not None:
        if bp.position == index:
            route.break_placement = BreakPlacement(index, BEFORE)
        elif bp.position > index:
            route.break_placement = BreakPlacement(bp.position - 1, bp.flag)
    return pid


def validate_solution(instance, solution):
    """Check every constraint independently and report all violations found."""
    report = ValidationReport()
    add = report.violations.append

    seen_routes = {}
    known_cg = set(instance.caregiver_by_id)
    for r in solution.routes:
        if r.caregiver_id not in known_cg:
            add(Violation(V_ROUTE_SET, caregiver_id=r.caregiver_id,
                          detail="route for unknown caregiver"))
        elif r.caregiver_id in seen_routes:
            add(Violation(V_ROUTE_SET, caregiver_id=r.caregiver_id,
                          detail="duplicate route for caregiver"))
        else:
            seen_routes[r.caregiver_id] = r
    for cid in sorted(known_cg - set(seen_routes)):
        add(Violation(V_ROUTE_SET, caregiver_id=cid,
                      detail="caregiver has no route"))

    known = set(instance.patient_by_id)
    where = {}
    for r in solution.routes:
        in_this_route = set()
        for pid in r.visits:
            if pid not in known:
                add(Violation(V_UNKNOWN_PATIENT, caregiver_id=r.caregiver_id,
                              patient_id=pid, detail="visit to unknown patient id"))
                continue
            if pid in in_this_route:
                add(Violation(V_DUPLICATE_IN_ROUTE, caregiver_id=r.caregiver_id,
                              patient_id=pid))
            elif pid in where:
                add(Violation(V_DUPLICATE_ACROSS_ROUTES, caregiver_id=r.caregiver_id,
                              patient_id=pid))
            else:
                where[pid] = r.caregiver_id
            in_this_route.add(pid)
    for pid in sorted(solution.bank):
        if pid not in known:
            add(Violation(V_UNKNOWN_PATIENT, patient_id=pid,
                          detail="banked unknown patient id"))
        elif pid in where:
            add(Violation(V_ROUTED_AND_BANKED, patient_id=pid,
                          caregiver_id=where[pid]))
    for pid in sorted(known):
        if pid not in where and pid not in solution.bank:
            add(Violation(V_MISSING_PATIENT, patient_id=pid,
                          detail="neither routed nor banked"))

    for r in solution.routes:
        if r.caregiver_id not in known_cg:
            continue
        cg = instance.caregiver_by_id[r.caregiver_id]
        for pid in r.visits:
            if pid in known and pid not in cg.eligible:
                add(Violation(V_ELIGIBILITY, caregiver_id=cg.id, patient_id=pid))
        bp = r.break_placement
        if bp is None:
            add(Violation(V_BREAK_MISSING, caregiver_id=cg.id,
                          detail="route has no break"))
            continue
        if not (0 <= bp.position <= len(r.visits)) or bp.flag not in (BEFORE, AFTER):
            add(Violation(V_BREAK_POSITION, caregiver_id=cg.id,
                          detail=f"position {bp.position} flag {bp.flag!r}"))
            continue
        # the break's host is a visited node by construction; cross-check
        # eligibility of the host patient explicitly all the same
        if bp.position < len(r.visits):
            host = r.visits[bp.position]
            if host in known and host not in cg.eligible:
                add(Violation(V_ELIGIBILITY, caregiver_id=cg.id, patient_id=host,
                              detail="break hosted at ineligible patient"))
        if all(pid in known for pid in r.visits):
            tl = evaluate_route(instance, r)
            if not tl.feasible:
                pid = (r.visits[tl.violation_at]
                       if tl.violation_at is not None and tl.violation_at < len(r.visits)
                       else None)
                add(Violation(tl.violation, caregiver_id=cg.id, patient_id=pid))
    return report
