"""Instance and solution file formats, importers, and generators.

Native instance format (version 1), line oriented, '#' starts a comment:

    HHSRP 1
    NAME <token>
    BREAK <duration> <window_open> <window_close>
    DISTANCES <convention>
    DEPOT <x> <y>                      # "- -" when coordinates are unknown
    PATIENT <id> <x> <y> <duration> <tw_open> <tw_close> <penalty>
    CAREGIVER <id> <max_working_time> <*|pid,pid,...>
    TRAVEL_TIME                        # optional, (n+1) rows of n+1 numbers
    ...
    TRAVEL_COST                        # optional, defaults to TRAVEL_TIME
    ...
    END

Conventions: euclidean_exact, euclidean_truncate_1dp (floor to one decimal,
the classic benchmark reading), euclidean_round_int (floor(d + 0.5)), and
explicit_matrix. The convention is mandatory and never inferred. When a
TRAVEL_TIME section is present it wins over coordinates and the parsed
instance carries convention explicit_matrix. Matrices index node 0 as the
depot and node i as patient i.

Solomon-style benchmark files are imported through a mandatory sidecar that
states the break policy and distance convention (and optionally caregiver
count, penalty, shift length, and eligibility); the depot row's due date
becomes the shift length and the first n customer rows become patients.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .model import (BEFORE, AFTER, BreakPlacement, BreakPolicy, Caregiver,
                    Patient, ProblemInstance, RoutePlan, Solution,
                    evaluate_route, solution_cost)

DISTANCE_CONVENTIONS = ("euclidean_exact", "euclidean_truncate_1dp",
                        "euclidean_round_int", "explicit_matrix")

# caregiver counts by benchmark size when the sidecar does not say
DEFAULT_CAREGIVERS = {30: 4, 50: 5, 100: 12}


class FormatError(ValueError):
    """Malformed instance/solution text; line is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def apply_convention(dist, convention):
    if convention == "euclidean_exact":
        return dist
    if convention == "euclidean_truncate_1dp":
        return math.floor(dist * 10.0) / 10.0
    if convention == "euclidean_round_int":
        return float(math.floor(dist + 0.5))
    raise ValueError(f"cannot derive distances for convention {convention!r}")


def build_matrix(coords, convention):
    """Distance matrix over [depot, p1, ..., pn] coordinate pairs."""
    size = len(coords)
    return [[0.0 if i == j else apply_convention(math.dist(coords[i], coords[j]),
                                                 convention)
             for j in range(size)] for i in range(size)]


def _content_lines(text):
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line


def _floats(tokens, no, what):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise FormatError(f"bad number in {what}", no)


def parse_native(text):
    """Parse native instance text into a ProblemInstance."""
    lines = list(_content_lines(text))
    if not lines:
        raise FormatError("empty instance file")
    no, header = lines[0]
    parts = header.split()
    if len(parts) != 2 or parts[0] != "HHSRP":
        raise FormatError("expected header 'HHSRP 1'", no)
    if parts[1] != "1":
        raise FormatError(f"unsupported format version {parts[1]}", no)

    name = None
    brk = None
    convention = None
    depot_xy = None
    depot_seen = False
    patients = []
    caregiver_rows = []
    matrices = {}
    idx = 1
    ended = False
    while idx < len(lines):
        no, line = lines[idx]
        idx += 1
        tok = line.split()
        key = tok[0].upper()
        if key == "END":
            ended = True
            break
        if key == "NAME":
            if len(tok) != 2:
                raise FormatError("NAME takes one token", no)
            name = tok[1]
        elif key == "BREAK":
            if len(tok) != 4:
                raise FormatError("BREAK takes duration window_open window_close", no)
            d, o, c = _floats(tok[1:], no, "BREAK")
            brk = BreakPolicy(d, o, c)
        elif key == "DISTANCES":
            if len(tok) != 2 or tok[1] not in DISTANCE_CONVENTIONS:
                raise FormatError(
                    f"DISTANCES must be one of {', '.join(DISTANCE_CONVENTIONS)}", no)
            convention = tok[1]
        elif key == "DEPOT":
            if len(tok) != 3:
                raise FormatError("DEPOT takes x y (or - -)", no)
            depot_seen = True
            if tok[1] != "-":
                x, y = _floats(tok[1:], no, "DEPOT")
                depot_xy = (x, y)
        elif key == "PATIENT":
            if len(tok) != 8:
                raise FormatError(
                    "PATIENT takes id x y duration tw_open tw_close penalty", no)
            try:
                pid = int(tok[1])
            except ValueError:
                raise FormatError("patient id must be an integer", no)
            if tok[2] == "-" or tok[3] == "-":
                x = y = None
            else:
                x, y = _floats(tok[2:4], no, "PATIENT coordinates")
            dur, a, b, cp = _floats(tok[4:], no, "PATIENT")
            patients.append(Patient(pid, dur, a, b, cp, x, y))
        elif key == "CAREGIVER":
            if len(tok) != 4:
                raise FormatError("CAREGIVER takes id max_working_time eligibility", no)
            try:
                cid = int(tok[1])
            except ValueError:
                raise FormatError("caregiver id must be an integer", no)
            (L,) = _floats(tok[2:3], no, "CAREGIVER")
            caregiver_rows.append((no, cid, L, tok[3]))
        elif key in ("TRAVEL_TIME", "TRAVEL_COST"):
            if not patients:
                raise FormatError(f"{key} section must follow the PATIENT lines", no)
            size = len(patients) + 1
            rows = []
            for _ in range(size):
                if idx >= len(lines):
                    raise FormatError(f"{key} needs {size} rows", no)
                rno, rline = lines[idx]
                idx += 1
                row = _floats(rline.split(), rno, key)
                if len(row) != size:
                    raise FormatError(f"{key} rows need {size} entries", rno)
                rows.append(row)
            matrices[key] = rows
        else:
            raise FormatError(f"unknown keyword {tok[0]!r}", no)
    if not ended:
        raise FormatError("missing END line")
    if name is None:
        raise FormatError("missing NAME line")
    if brk is None:
        raise FormatError("missing BREAK line")
    if convention is None:
        raise FormatError("missing DISTANCES line")
    if not patients:
        raise FormatError("no PATIENT lines")
    if not caregiver_rows:
        raise FormatError("no CAREGIVER lines")
    if not depot_seen:
        raise FormatError("missing DEPOT line")

    known_ids = {p.id for p in patients}
    caregivers = []
    for no, cid, L, spec in caregiver_rows:
        if spec == "*":
            eligible = frozenset(known_ids)
        else:
            try:
                eligible = frozenset(int(s) for s in spec.split(",") if s)
            except ValueError:
                raise FormatError("eligibility must be * or comma-separated ids", no)
            if not eligible <= known_ids:
                raise FormatError("eligibility references unknown patient ids", no)
        caregivers.append(Caregiver(cid, L, eligible))

    if "TRAVEL_TIME" in matrices:
        tt = matrices["TRAVEL_TIME"]
        convention = "explicit_matrix"
    else:
        if convention == "explicit_matrix":
            raise FormatError("explicit_matrix requires a TRAVEL_TIME section")
        coords = [depot_xy] + [(p.x, p.y) for p in sorted(patients, key=lambda p: p.id)]
        if any(c is None or c[0] is None for c in coords):
            raise FormatError(
                f"convention {convention} needs coordinates for the depot and all patients")
        tt = build_matrix(coords, convention)
    ct = matrices.get("TRAVEL_COST")

    try:
        return ProblemInstance(name, patients, caregivers, brk, travel_time=tt,
                               travel_cost=ct, depot_xy=depot_xy,
                               distance_convention=convention)
    except ValueError as exc:
        raise FormatError(str(exc))


def _fmt(x):
    return repr(float(x))


def write_native(instance):
    """Canonical native text for an instance; parse(write(x)) == x."""
    out = ["HHSRP 1", f"NAME {instance.name}"]
    bp = instance.break_policy
    out.append(f"BREAK {_fmt(bp.duration)} {_fmt(bp.window_open)} {_fmt(bp.window_close)}")

    convention = instance.distance_convention
    need_matrix = convention == "explicit_matrix"
    if not need_matrix:
        # only trust the derivation when it actually reproduces the matrix
        coords = [instance.depot_xy] + [(p.x, p.y) for p in instance.patients]
        if any(c is None or c[0] is None for c in coords):
            need_matrix = True
        else:
            derived = build_matrix(coords, convention)
            need_matrix = any(
                abs(derived[i][j] - instance.travel_time[i][j]) > 1e-9
                for i in range(instance.n + 1) for j in range(instance.n + 1))
    out.append(f"DISTANCES {'explicit_matrix' if need_matrix else convention}")

    if instance.depot_xy is None:
        out.append("DEPOT - -")
    else:
        out.append(f"DEPOT {_fmt(instance.depot_xy[0])} {_fmt(instance.depot_xy[1])}")
    for p in instance.patients:
        x = "-" if p.x is None else _fmt(p.x)
        y = "-" if p.y is None else _fmt(p.y)
        out.append(f"PATIENT {p.id} {x} {y} {_fmt(p.duration)} "
                   f"{_fmt(p.tw_open)} {_fmt(p.tw_close)} {_fmt(p.penalty)}")
    all_ids = {p.id for p in instance.patients}
    for c in instance.caregivers:
        elig = "*" if set(c.eligible) == all_ids else ",".join(
            str(i) for i in sorted(c.eligible))
        out.append(f"CAREGIVER {c.id} {_fmt(c.max_working_time)} {elig}")
    if need_matrix:
        out.append("TRAVEL_TIME")
        for row in instance.travel_time:
            out.append(" ".join(_fmt(v) for v in row))
    if any(instance.travel_cost[i][j] != instance.travel_time[i][j]
           for i in range(instance.n + 1) for j in range(instance.n + 1)):
        out.append("TRAVEL_COST")
        for row in instance.travel_cost:
            out.append(" ".join(_fmt(v) for v in row))
    out.append("END")
    return "\n".join(out) + "\n"


def load_instance(path):
    return parse_native(Path(path).read_text())


def save_instance(instance, path):
    Path(path).write_text(write_native(instance))


# ---------------------------------------------------------------------------
# Solomon-style import


def parse_sidecar(text):
    """Sidecar companion for benchmark imports; BREAK and DISTANCES are
    mandatory (never guessed), the rest defaults."""
    lines = list(_content_lines(text))
    if not lines or lines[0][1].split() != ["HHSRP-SIDECAR", "1"]:
        raise FormatError("expected header 'HHSRP-SIDECAR 1'",
                          lines[0][0] if lines else None)
    side = {"penalty": 1000.0, "caregivers": None, "patients": None,
            "max_work": None, "break": None, "convention": None,
            "eligible": None}
    for no, line in lines[1:]:
        tok = line.split()
        key = tok[0].upper()
        if key == "END":
            break
        if key == "BREAK":
            if len(tok) != 4:
                raise FormatError("BREAK takes duration window_open window_close", no)
            d, o, c = _floats(tok[1:], no, "BREAK")
            side["break"] = BreakPolicy(d, o, c)
        elif key == "DISTANCES":
            if len(tok) != 2 or tok[1] not in DISTANCE_CONVENTIONS:
                raise FormatError("bad DISTANCES convention", no)
            if tok[1] == "explicit_matrix":
                raise FormatError("imports derive distances from coordinates; "
                                  "explicit_matrix is not a sidecar convention", no)
            side["convention"] = tok[1]
        elif key == "CAREGIVERS":
            side["caregivers"] = int(_floats(tok[1:2], no, "CAREGIVERS")[0])
        elif key == "PATIENTS":
            side["patients"] = int(_floats(tok[1:2], no, "PATIENTS")[0])
        elif key == "PENALTY":
            side["penalty"] = _floats(tok[1:2], no, "PENALTY")[0]
        elif key == "MAX_WORK":
            side["max_work"] = _floats(tok[1:2], no, "MAX_WORK")[0]
        elif key == "ELIGIBLE":
            if len(tok) != 3:
                raise FormatError("ELIGIBLE takes caregiver_id id,id,...", no)
            side.setdefault("eligible_rows", []).append(
                (int(tok[1]), [int(s) for s in tok[2].split(",") if s]))
        else:
            raise FormatError(f"unknown sidecar keyword {tok[0]!r}", no)
    if side["break"] is None:
        raise FormatError("sidecar must state the BREAK policy; refusing to guess")
    if side["convention"] is None:
        raise FormatError("sidecar must state the DISTANCES convention")
    return side


def import_solomon(text, sidecar_text, n_patients=None, filename=None):
    """Build an instance from Solomon-format text plus a sidecar.

    The patient count comes from (in order) the n_patients argument, the
    sidecar PATIENTS line, or a _NN suffix on the file name. The depot row's
    due date is the shift length unless the sidecar overrides it.
    """
    side = parse_sidecar(sidecar_text)

    name = None
    rows = []
    for _no, line in _content_lines(text):
        tok = line.split()
        if len(tok) >= 7:
            try:
                rows.append([float(t) for t in tok[:7]])
                continue
            except ValueError:
                pass
        if name is None and len(tok) == 1 and not tok[0].isdigit():
            name = tok[0]
    if not rows:
        raise FormatError("no customer rows found (need 7 numeric columns)")
    if name is None:
        name = Path(filename).stem if filename else "solomon"

    n = n_patients or side["patients"]
    if n is None and filename:
        stem = Path(filename).stem
        tail = stem.rsplit("_", 1)
        if len(tail) == 2 and tail[1].isdigit():
            n = int(tail[1])
    if n is None:
        raise FormatError("patient count not given (argument, sidecar PATIENTS, "
                          "or _NN file suffix)")
    if len(rows) < n + 1:
        raise FormatError(f"file has {len(rows) - 1} customers, need {n}")

    depot_row = rows[0]
    depot_xy = (depot_row[1], depot_row[2])
    max_work = side["max_work"] if side["max_work"] is not None else depot_row[5]

    patients = []
    for i, row in enumerate(rows[1:n + 1], start=1):
        _cust, x, y, _demand, ready, due, service = row
        patients.append(Patient(i, service, ready, due, side["penalty"], x, y))

    m = side["caregivers"]
    if m is None:
        m = DEFAULT_CAREGIVERS.get(n)
    if m is None:
        raise FormatError(f"caregiver count not given and no default for size {n}")
    all_ids = frozenset(p.id for p in patients)
    rows_elig = side.get("eligible_rows")
    caregivers = []
    for cid in range(1, m + 1):
        elig = all_ids
        if rows_elig is not None:
            listed = dict(rows_elig)
            if cid not in listed:
                raise FormatError(f"sidecar ELIGIBLE rows missing caregiver {cid}")
            elig = frozenset(listed[cid])
        caregivers.append(Caregiver(cid, max_work, elig))

    coords = [depot_xy] + [(p.x, p.y) for p in patients]
    tt = build_matrix(coords, side["convention"])
    return ProblemInstance(f"{name}_{n}", patients, caregivers, side["break"],
                           travel_time=tt, depot_xy=depot_xy,
                           distance_convention=side["convention"])


# ---------------------------------------------------------------------------
# outbreak-style generator


def generate_covid_style(n_patients, n_caregivers, seed, bbox=(0.0, 0.0, 30.0, 30.0),
                         points=None, name=None, service_means=(10.0, 15.0, 20.0),
                         service_cv=0.25, shift=540.0,
                         break_policy=BreakPolicy(60.0, 120.0, 300.0),
                         penalty=1000.0):
    """Pandemic-era home-visit instance.

    Patients split 60/30/10 percent into acuity types I/II/III (type II and
    III counts floored, remainder to type I) with gamma-distributed service
    durations (per-type means, fixed coefficient of variation, floored at
    one minute) and whole-shift time windows. Caregiver capability is
    nested: everyone serves type I, about half also type II, about a fifth
    also type III (counts rounded half-up). Locations come from `points`
    ([depot, p1, ...]) or uniformly from bbox with the depot at its center.
    Derived values are deterministic in the seed: draw order is locations,
    type shuffle, durations.
    """
    if n_patients < 1 or n_caregivers < 1:
        raise ValueError("need at least one patient and one caregiver")
    rng = np.random.default_rng(seed)
    if points is not None:
        if len(points) != n_patients + 1:
            raise ValueError(f"points must list depot plus {n_patients} patients")
        depot_xy = tuple(float(v) for v in points[0])
        coords = [tuple(float(v) for v in pt) for pt in points[1:]]
    else:
        x0, y0, x1, y1 = bbox
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"degenerate bounding box {bbox}")
        depot_xy = ((x0 + x1) / 2.0, (y0 + y1) / 2.0)
        xs = rng.uniform(x0, x1, size=n_patients)
        ys = rng.uniform(y0, y1, size=n_patients)
        coords = list(zip(xs.tolist(), ys.tolist()))

    n2 = math.floor(0.3 * n_patients + 1e-9)
    n3 = math.floor(0.1 * n_patients + 1e-9)
    n1 = n_patients - n2 - n3
    types = rng.permutation(np.array([1] * n1 + [2] * n2 + [3] * n3))

    shape = 1.0 / (service_cv * service_cv)
    means = {1: service_means[0], 2: service_means[1], 3: service_means[2]}
    patients = []
    for i in range(n_patients):
        ty = int(types[i])
        dur = float(rng.gamma(shape, means[ty] / shape))
        if dur < 1.0:
            dur = 1.0
        patients.append(Patient(i + 1, dur, 0.0, shift, penalty,
                                coords[i][0], coords[i][1]))

    c2 = math.floor(0.5 * n_caregivers + 0.5)
    c3 = math.floor(0.2 * n_caregivers + 0.5)
    caregivers = []
    for k in range(n_caregivers):
        capable = {1}
        if k < c2:
            capable.add(2)
        if k < c3:
            capable.add(3)
        elig = frozenset(p.id for i, p in enumerate(patients)
                         if int(types[i]) in capable)
        caregivers.append(Caregiver(k + 1, shift, elig))

    tt = build_matrix([depot_xy] + coords, "euclidean_exact")
    return ProblemInstance(name or f"covid{n_patients}_{seed}", patients,
                           caregivers, break_policy, travel_time=tt,
                           depot_xy=depot_xy,
                           distance_convention="euclidean_exact")


# ---------------------------------------------------------------------------
# solution files


def write_solution(instance, solution):
    cost = solution_cost(instance, solution)
    out = ["HHSRP-SOLUTION 1", f"INSTANCE {instance.name}",
           f"TRAVEL {_fmt(cost.travel)}", f"PENALTY {_fmt(cost.penalty)}",
           f"TOTAL {_fmt(cost.total)}"]
    for r in solution.routes:
        bp = r.break_placement
        flag = "before" if bp.flag == BEFORE else "after"
        out.append(f"ROUTE {r.caregiver_id} {bp.position} {flag}")
        out.append("VISITS" + ("" if not r.visits else " " + " ".join(map(str, r.visits))))
        tl = evaluate_route(instance, r)
        if tl.feasible:
            starts = " ".join(f"{s:.2f}" for s in tl.service_starts)
            out.append(f"# starts {starts}" if starts else "# starts -")
            out.append(f"# break_start {tl.break_start:.2f} "
                       f"depot_return {tl.depot_return:.2f}")
    out.append("BANK" + ("" if not solution.bank
                         else " " + " ".join(map(str, sorted(solution.bank)))))
    out.append("END")
    return "\n".join(out) + "\n"


def read_solution(instance, text):
    """Parse a solution file; the stored total must match the recomputed
    cost (1e-6) and the instance name must match."""
    lines = list(_content_lines(text))
    if not lines or lines[0][1].split() != ["HHSRP-SOLUTION", "1"]:
        raise FormatError("expected header 'HHSRP-SOLUTION 1'",
                          lines[0][0] if lines else None)
    total = None
    routes = []
    bank = set()
    pending_route = None
    for no, line in lines[1:]:
        tok = line.split()
        key = tok[0].upper()
        if key == "END":
            break
        if key == "INSTANCE":
            if len(tok) != 2 or tok[1] != instance.name:
                raise FormatError(
                    f"solution is for {tok[1] if len(tok) > 1 else '?'}, "
                    f"not {instance.name}", no)
        elif key in ("TRAVEL", "PENALTY", "TOTAL"):
            val = _floats(tok[1:2], no, key)[0]
            if key == "TOTAL":
                total = val
        elif key == "ROUTE":
            if pending_route is not None:
                raise FormatError("ROUTE without VISITS line", no)
            if len(tok) != 4 or tok[3] not in ("before", "after"):
                raise FormatError("ROUTE takes caregiver_id break_pos before|after", no)
            pending_route = (int(tok[1]), int(tok[2]),
                             BEFORE if tok[3] == "before" else AFTER)
        elif key == "VISITS":
            if pending_route is None:
                raise FormatError("VISITS without a ROUTE line", no)
            cid, bpos, bflag = pending_route
            try:
                visits = [int(t) for t in tok[1:]]
            except ValueError:
                raise FormatError("VISITS must be integer ids", no)
            routes.append(RoutePlan(cid, visits, BreakPlacement(bpos, bflag)))
            pending_route = None
        elif key == "BANK":
            try:
                bank = {int(t) for t in tok[1:]}
            except ValueError:
                raise FormatError("BANK must be integer ids", no)
        else:
            raise FormatError(f"unknown keyword {tok[0]!r}", no)
    if pending_route is not None:
        raise FormatError("ROUTE without VISITS line")
    if total is None:
        raise FormatError("missing TOTAL line")
    solution = Solution(routes, bank)
    actual = solution_cost(instance, solution).total
    if abs(actual - total) > 1e-6:
        raise FormatError(f"stored total {total} does not match recomputed "
                          f"{actual}")
    return solution


def load_solution(instance, path):
    return read_solution(instance, Path(path).read_text())


def save_solution(instance, solution, path):
    Path(path).write_text(write_solution(instance, solution))


# ---------------------------------------------------------------------------
# GeoJSON export


def export_geojson(instance, solution=None):
    """FeatureCollection with the depot, every patient, and one LineString
    per non-empty route (planar coordinates as given)."""
    if instance.depot_xy is None or any(p.x is None for p in instance.patients):
        raise ValueError("instance has no coordinates (matrix-only); "
                         "GeoJSON export needs patient and depot positions")
    feats = [{
        "type": "Feature",
        "geometry": {"type": "Point", "coordinates": list(instance.depot_xy)},
        "properties": {"role": "depot"},
    }]
    banked = solution.bank if solution is not None else set()
    for p in instance.patients:
        props = {"role": "patient", "id": p.id}
        if solution is not None:
            props["banked"] = p.id in banked
        feats.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [p.x, p.y]},
            "properties": props,
        })
    if solution is not None:
        for r in solution.routes:
            if not r.visits:
                continue
            pts = [list(instance.depot_xy)]
            pts += [[instance.patient_by_id[pid].x, instance.patient_by_id[pid].y]
                    for pid in r.visits]
            pts.append(list(instance.depot_xy))
            feats.append({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": pts},
                "properties": {"role": "route", "caregiver_id": r.caregiver_id,
                               "visits": list(r.visits)},
            })
    return {"type": "FeatureCollection", "features": feats}


def geojson_text(instance, solution=None):
    return json.dumps(export_geojson(instance, solution), indent=2)
