"""Home-healthcare scheduling and routing with mandatory lunch breaks.

Solver library and benchmark tooling: an adaptive large neighborhood search
engine over routes with hard time windows, caregiver eligibility, and one
mandatory break per caregiver, plus instance formats, an exact oracle for
desk-size instances, and an experiment harness with a command-line front
end (`hhsrp`).
"""

from .model import (AFTER, BEFORE, BreakPlacement, BreakPolicy, Caregiver,
                    CostBreakdown, Patient, ProblemInstance, RoutePlan,
                    ScheduleTimeline, Solution, ValidationReport, Violation,
                    evaluate_route, insertion_delta, route_travel_cost,
                    solution_cost, validate_solution)
from .alns import (SearchConfig, SearchResult, TraceRecord, build_initial,
                   init_temperature, run, sa_accept)
from .oracle import (OracleResult, brute_force_optimum, certify, dp_optimum,
                     random_tiny_instance)
from .instances import (FormatError, export_geojson, generate_covid_style,
                        import_solomon, load_instance, load_solution,
                        parse_native, read_solution, save_instance,
                        save_solution, write_native, write_solution)
from .bench import (ExperimentSpec, RunRecord, compute_rcp, gap_stats,
                    load_reference, replication_seed, run_experiment,
                    run_single, summarize)

__version__ = "0.1.0"

__all__ = [
    "AFTER", "BEFORE", "BreakPlacement", "BreakPolicy", "Caregiver",
    "CostBreakdown", "Patient", "ProblemInstance", "RoutePlan",
    "ScheduleTimeline", "Solution", "ValidationReport", "Violation",
    "evaluate_route", "insertion_delta", "route_travel_cost",
    "solution_cost", "validate_solution",
    "SearchConfig", "SearchResult", "TraceRecord", "build_initial",
    "init_temperature", "run", "sa_accept",
    "OracleResult", "brute_force_optimum", "certify", "dp_optimum",
    "random_tiny_instance",
    "FormatError", "export_geojson", "generate_covid_style", "import_solomon",
    "load_instance", "load_solution", "parse_native", "read_solution",
    "save_instance", "save_solution", "write_native", "write_solution",
    "ExperimentSpec", "RunRecord", "compute_rcp", "gap_stats",
    "load_reference", "replication_seed", "run_experiment", "run_single",
    "summarize",
    "__version__",
]
