"""Benchmark harness: replicated runs, summary metrics, reference comparison.

Replication seeds are derived from the experiment seed base and the instance
name with a documented 64-bit mix (FNV-1a over the name, xor the base,
splitmix64, add the replication index, splitmix64 again) so streams are
independent and reproducible regardless of run order.

Metric conventions (two gap readings exist in the literature; both are
reported, the *_alt columns divide by the average/maximum instead):

    gap1    = 100 * (avg - best) / best
    gap2    = 100 * (worst - avg) / avg
    avg_gap = 100 * (ref - best) / ref   (positive means an improvement)
    rcp     = 100 * (f - f_min) / f_min  across parameter settings
"""

from __future__ import annotations

import csv
import glob as globlib
import json
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import alns
from .model import solution_cost, validate_solution

RUN_FIELDS = ("instance", "variant", "seed", "replication", "best", "travel",
              "penalty", "unvisited", "iterations", "restarts", "wall_time_s")

SUMMARY_FIELDS = ("instance", "variant", "replications", "best", "best_avg",
                  "worst", "std", "cv", "gap1", "gap2", "gap1_alt", "gap2_alt",
                  "avg_unvisited", "ref", "ref_unvisited", "status", "avg_gap",
                  "avg_cpu_s")


class BenchError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    """What to run: instances x variants x replications."""

    instances: list
    variants: list = field(default_factory=lambda: ["A0"])
    replications: int = 5
    seed_base: int = 0
    overrides: dict = field(default_factory=dict)
    reference: str | None = None   # None = packaged table
    jobs: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise BenchError("replications must be >= 1")
        for v in self.variants:
            if v not in alns.VARIANT_IDS:
                raise BenchError(f"unknown variant {v!r}")

    @classmethod
    def from_json(cls, path):
        raw = json.loads(Path(path).read_text())
        known = {"instances", "variants", "replications", "seed_base",
                 "overrides", "reference", "jobs"}
        extra = set(raw) - known
        if extra:
            raise BenchError(f"unknown experiment keys: {sorted(extra)}")
        if "instances" not in raw:
            raise BenchError("experiment file needs an 'instances' list")
        paths = []
        for pattern in raw["instances"]:
            hits = sorted(globlib.glob(pattern)) \
                if any(ch in pattern for ch in "*?[") else [pattern]
            if not hits:
                raise BenchError(f"no instances match {pattern!r}")
            paths.extend(str(p) for p in hits)
        raw["instances"] = paths
        return cls(**raw)


@dataclass
class RunRecord:
    instance: str
    variant: str
    seed: int
    replication: int
    best: float
    travel: float
    penalty: float
    unvisited: int
    iterations: int
    restarts: int
    wall_time_s: float
    solution: object = None


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def replication_seed(seed_base, instance_name, replication):
    """Stable 63-bit seed for one replication of one instance."""
    h = _FNV_OFFSET
    for byte in instance_name.encode():
        h = ((h ^ byte) * _FNV_PRIME) & _MASK
    h = _splitmix64(h ^ (seed_base & _MASK))
    h = _splitmix64((h + replication) & _MASK)
    return h >> 1


def run_single(instance, variant, seed, replication=0, overrides=None):
    """One search run, re-validated and recosted before it is reported."""
    cfg = alns.SearchConfig.for_variant(variant, seed=seed,
                                        collect_trace=False,
                                        **(overrides or {}))
    t0 = time.perf_counter()
    res = alns.run(instance, cfg)
    wall = time.perf_counter() - t0
    report = validate_solution(instance, res.best)
    if not report.ok:
        raise BenchError(f"{instance.name}/{variant}/seed {seed}: search "
                         f"returned an invalid solution: {report.violations}")
    cost = solution_cost(instance, res.best)
    return RunRecord(instance.name, variant, seed, replication, cost.total,
                     cost.travel, cost.penalty, len(res.best.bank),
                     res.iterations, res.restarts, wall, res.best)


def _worker(args):
    instance, variant, seed, replication, overrides = args
    return run_single(instance, variant, seed, replication, overrides)


def run_experiment(spec, instances=None, progress=None):
    """Run the full grid and return RunRecords sorted by (instance, variant,
    replication). `instances` may pass pre-built ProblemInstances; otherwise
    spec.instances are treated as native-format file paths."""
    if instances is None:
        from .instances import load_instance
        instances = [load_instance(p) for p in spec.instances]
    tasks = [(inst, v, replication_seed(spec.seed_base, inst.name, r), r,
              spec.overrides)
             for inst in instances for v in spec.variants
             for r in range(spec.replications)]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            records = list(pool.map(_worker, tasks))
    else:
        records = []
        for task in tasks:
            records.append(_worker(task))
            if progress:
                progress(records[-1])
    records.sort(key=lambda r: (r.instance, r.variant, r.replication))
    return records


def compute_rcp(costs):
    """Relative cost percentage per setting: 100*(f - f_min)/f_min."""
    if not costs:
        return {}
    f_min = min(costs.values())
    if f_min <= 0:
        raise BenchError("RCP needs positive costs")
    return {k: 100.0 * (v - f_min) / f_min for k, v in costs.items()}


def gap_stats(costs):
    """Replication spread, in both denominator conventions."""
    costs = list(costs)
    if not costs:
        raise BenchError("gap_stats needs at least one cost")
    best, worst = min(costs), max(costs)
    avg = sum(costs) / len(costs)
    return {
        "gap1": 100.0 * (avg - best) / best if best else 0.0,
        "gap2": 100.0 * (worst - avg) / avg if avg else 0.0,
        "gap1_alt": 100.0 * (avg - best) / avg if avg else 0.0,
        "gap2_alt": 100.0 * (worst - avg) / worst if worst else 0.0,
    }


def load_reference(path=None):
    """instance name -> (best objective or None, unvisited count)."""
    if path is None:
        text = (resources.files("hhsrp") / "data" / "reference_best.csv").read_text()
    else:
        text = Path(path).read_text()
    table = {}
    for row in csv.DictReader(text.splitlines()):
        ref = row["best_known"].strip()
        table[row["instance"]] = (float(ref) if ref else None,
                                  int(row["unvisited"]))
    return table


def summarize(records, reference=None):
    """Per (instance, variant) aggregate rows in CSV column order."""
    groups = {}
    for r in records:
        groups.setdefault((r.instance, r.variant), []).append(r)
    rows = []
    for (inst, variant), runs in sorted(groups.items()):
        costs = [r.best for r in runs]
        best, worst = min(costs), max(costs)
        avg = sum(costs) / len(costs)
        std = statistics.stdev(costs) if len(costs) > 1 else 0.0
        gaps = gap_stats(costs)
        row = {
            "instance": inst, "variant": variant, "replications": len(runs),
            "best": best, "best_avg": avg, "worst": worst, "std": std,
            "cv": std / avg if avg else 0.0,
            "avg_unvisited": sum(r.unvisited for r in runs) / len(runs),
            "avg_cpu_s": sum(r.wall_time_s for r in runs) / len(runs),
            "ref": "", "ref_unvisited": "", "status": "no_ref", "avg_gap": "",
            **gaps,
        }
        if reference and inst in reference:
            ref, ref_unvisited = reference[inst]
            row["ref_unvisited"] = ref_unvisited
            if ref is None:
                row["status"] = "new_best"
            else:
                row["ref"] = ref
                row["avg_gap"] = 100.0 * (ref - best) / ref
                if abs(best - ref) <= 1e-6:
                    row["status"] = "optimal"
                elif best < ref:
                    row["status"] = "improved"
                else:
                    row["status"] = "worse"
        rows.append(row)
    return rows


def instance_class(name):
    """Benchmark class label, e.g. C101_30 -> C1_30; None when unnamedly shaped."""
    stem, _, size = name.partition("_")
    if not size.isdigit() or len(stem) < 2:
        return None
    family = stem.rstrip("0123456789")
    digits = stem[len(family):]
    if family not in ("C", "R", "RC") or not digits:
        return None
    return f"{family}{digits[0]}_{size}"


def class_summary(rows):
    """Aggregate summarize() rows by benchmark class and variant."""
    groups = {}
    for row in rows:
        label = instance_class(row["instance"])
        if label is None:
            continue
        groups.setdefault((label, row["variant"]), []).append(row)
    out = []
    for (label, variant), grp in sorted(groups.items()):
        bests = [g["best"] for g in grp]
        avg_best = sum(bests) / len(bests)
        std_best = statistics.stdev(bests) if len(bests) > 1 else 0.0
        counted = [g for g in grp if g["avg_gap"] != ""]
        out.append({
            "class": label, "variant": variant, "instances": len(grp),
            "best_avg": avg_best, "best_std": std_best,
            "cv_best": std_best / avg_best if avg_best else 0.0,
            "avg_unvisited": sum(g["avg_unvisited"] for g in grp) / len(grp),
            "n_optimal": sum(g["status"] == "optimal" for g in grp),
            "n_improved": sum(g["status"] == "improved" for g in grp),
            "n_worse": sum(g["status"] == "worse" for g in grp),
            "n_new_best": sum(g["status"] == "new_best" for g in grp),
            "avg_gap": (sum(g["avg_gap"] for g in counted) / len(counted)
                        if counted else ""),
            "avg_cpu_s": sum(g["avg_cpu_s"] for g in grp) / len(grp),
        })
    return out


def _write_csv(path, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames)
        w.writeheader()
        for row in rows:
            w.writerow({k: row[k] for k in fieldnames})


def write_runs_csv(records, path):
    _write_csv(path, RUN_FIELDS,
               [{f: getattr(r, f) for f in RUN_FIELDS} for r in records])


def write_summary_csv(rows, path):
    _write_csv(path, SUMMARY_FIELDS, rows)
