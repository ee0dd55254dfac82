"""Command-line entry point: ``dsmflow {list,solve,diagnose,compare}``.

Exit codes: 0 converged (or all diagnostics passed), 1 ran but did not
converge / a diagnostic failed, 2 diverged, 3 step underflow or singular
linear solve, 4 configuration error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import corpus
from . import diagnostics as diag
from .errors import DSMError, InvalidConfig, UnknownProblem
from .integrate import IntegratorConfig, StopReason
from .report import TRACE_COLUMNS, trace_rows, write_report_json, write_rows_csv, write_trace_csv
from .solvers import (PowerLawSchedule, discrete_newton, random_starts,
                      solve_newton_dsm, solve_regularized_dsm)

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_DIVERGED = 2
EXIT_SOLVER_FAILURE = 3
EXIT_CONFIG = 4

OUTPUT_ENV = "DSMFLOW_OUTPUT_DIR"
DEFAULT_OUTPUT = "dsmflow-runs"
SOLVER_DEFAULTS = {"newton": {"t_max": 50.0, "hmax": 0.1},
                   "regularized": {"t_max": 200.0}}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


@dataclass
class RunConfig:
    problem_name: str
    solver: str = "newton"
    u0: str = "zero"
    a0: float = None
    b: float = None
    overrides: dict = field(default_factory=dict)
    checkpoints: tuple = ()
    out_dir: Path = None
    run_id: str = None
    sweep: int = 0
    seed: int = None
    inject_corrupt_trace: bool = False


def parse_u0(spec, n):
    """``zero``, ``ones``, ``ones*K`` / ``K*ones``, or a comma-separated vector."""
    s = spec.strip().lower().replace(" ", "")
    if s in ("zero", "zeros", "0"):
        return np.zeros(n)
    if s in ("one", "ones"):
        return np.ones(n)
    if "*" in s:
        left, right = s.split("*", 1)
        scale, name = (left, right) if right in ("ones", "one") else (right, left)
        if name not in ("ones", "one"):
            raise ConfigError(f"cannot parse u0 preset {spec!r}")
        try:
            return float(scale) * np.ones(n)
        except ValueError:
            raise ConfigError(f"cannot parse u0 scale in {spec!r}") from None
    try:
        vals = np.array([float(x) for x in s.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse u0 {spec!r}") from None
    if vals.size != n:
        raise ConfigError(f"u0 has {vals.size} entries, problem dimension is {n}")
    if not np.all(np.isfinite(vals)):
        raise ConfigError("u0 must be finite")
    return vals


def _parse_grid(spec):
    if not spec:
        return ()
    try:
        return tuple(float(x) for x in spec.split(","))
    except ValueError:
        raise ConfigError(f"cannot parse checkpoint list {spec!r}") from None


def build_config(entry, rc: RunConfig) -> IntegratorConfig:
    kw = dict(SOLVER_DEFAULTS[rc.solver])
    kw.update(entry.config_hints)
    kw.update({k: v for k, v in rc.overrides.items() if v is not None})
    if rc.checkpoints:
        kw["checkpoint_grid"] = rc.checkpoints
    try:
        return IntegratorConfig(**kw)
    except InvalidConfig as exc:
        raise ConfigError(str(exc)) from None


def build_schedule(entry, rc: RunConfig):
    a0 = rc.a0 if rc.a0 is not None else entry.schedule[0]
    b = rc.b if rc.b is not None else entry.schedule[1]
    try:
        return PowerLawSchedule(a0, b)
    except DSMError as exc:
        raise ConfigError(str(exc)) from None


def exit_code_for(report):
    if report.converged:
        return EXIT_OK
    if report.stop_reason is StopReason.DIVERGED:
        return EXIT_DIVERGED
    if report.stop_reason in (StopReason.STEP_UNDERFLOW, StopReason.LINEAR_SOLVE_FAILED):
        return EXIT_SOLVER_FAILURE
    return EXIT_NOT_CONVERGED


def _output_root(rc):
    root = rc.out_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    return Path(root)


def corrupt_trajectory(report):
    """Test hook: damage one checkpoint of the trace so the battery must fail."""
    traj = report.trajectory
    cp = [i for i in traj.checkpoint_indices() if traj.t[i] > 0]
    if not cp:
        return
    if report.solver == "newton":
        i = cp[len(cp) // 2]
        traj.residual_norm[i] *= 1.01
        traj.flow_residual_norm[i] *= 1.01
    else:
        inside = [i for i in cp if 1.0 < traj.t[i] < 2.0] or cp
        i = inside[len(inside) // 2]
        traj.u[i] *= 1.01


def execute(entry, rc: RunConfig, u0, cfg, schedule, diagnose, run_dir):
    """Run one solve (and optionally the battery); write trace and report."""
    problem = entry.problem
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if rc.solver == "newton":
            report = solve_newton_dsm(problem, u0, cfg)
        else:
            report = solve_regularized_dsm(problem, u0, schedule, cfg)
    code = exit_code_for(report)
    payload = {
        "run_id": rc.run_id,
        "problem": entry.name,
        "regime": entry.regime.value,
        "solver": rc.solver,
        "u0": u0,
        "config": {k: getattr(cfg, k) for k in (
            "rtol", "atol", "h0", "hmin", "hmax", "t_max", "residual_stop",
            "divergence_norm")},
        "schedule": schedule.as_dict() if rc.solver == "regularized" else None,
        "stop_reason": report.stop_reason.value,
        "converged": report.converged,
        "final_t": report.trajectory.final_t,
        "final_u": report.final_u,
        "final_residual_norm": report.trajectory.residual_norm[-1],
        "final_u_norm": report.trajectory.u_norm[-1],
        "counters": {"steps": report.step_count, "jacobians": report.jacobian_count,
                     "linear_solves": report.linear_solve_count},
        "notes": report.notes,
        "extras": report.extras,
        "invariant_summaries": [r.as_dict() for r in report.invariant_summaries],
    }
    if diagnose:
        if rc.inject_corrupt_trace:
            corrupt_trajectory(report)
            payload["corrupted_trace"] = True
        results, skipped = diag.run_battery(problem, report, schedule, cfg.atol,
                                            coercive=entry.coercive)
        payload["diagnostics"] = [r.as_dict() for r in results]
        payload["skipped_diagnostics"] = [{"name": n, "reason": why} for n, why in skipped]
        if code == EXIT_OK and not all(r.passed for r in results):
            code = EXIT_NOT_CONVERGED
        payload["diagnostics_passed"] = all(r.passed for r in results)
    payload["exit_code"] = code
    run_dir.mkdir(parents=True, exist_ok=True)
    write_trace_csv(run_dir / "trace.csv", report.trajectory, rc.solver == "regularized")
    write_report_json(run_dir / "report.json", payload)
    return code, report, payload


def _summary_line(rc, report, code, payload):
    line = (f"{rc.run_id}: {report.stop_reason.value} t={report.trajectory.final_t:.6g} "
            f"residual={report.trajectory.residual_norm[-1]:.3e} "
            f"|u|={report.trajectory.u_norm[-1]:.4g} exit={code}")
    if "diagnostics" in payload:
        marks = ", ".join(f"{d['name']}={'pass' if d['passed'] else 'FAIL'}"
                          for d in payload["diagnostics"])
        line += f" [{marks}]"
    return line


def run_solve(rc: RunConfig, diagnose=False):
    entry = corpus.get(rc.problem_name)
    n = entry.problem.dimension
    cfg = build_config(entry, rc)
    schedule = build_schedule(entry, rc)
    root = _output_root(rc)
    rc.run_id = rc.run_id or f"{entry.name}-{rc.solver}"
    if rc.sweep:
        starts = random_starts(n, rc.sweep, seed=rc.seed)
        base = rc.run_id
        codes = []
        for k, u0 in enumerate(starts):
            rc.run_id = f"{base}/sweep-{k:03d}"
            code, report, payload = execute(entry, rc, u0, cfg, schedule, diagnose,
                                            root / rc.run_id)
            print(_summary_line(rc, report, code, payload))
            codes.append(code)
        return max(codes)
    u0 = parse_u0(rc.u0, n)
    code, report, payload = execute(entry, rc, u0, cfg, schedule, diagnose,
                                    root / rc.run_id)
    print(_summary_line(rc, report, code, payload))
    for note in report.notes:
        print(f"  note: {note}")
    return code


def run_diagnose_all(rc: RunConfig):
    root = _output_root(rc)
    ok = True
    for entry in corpus.list_entries():
        md = entry.problem.metadata
        plans = []
        if entry.regime is corpus.Regime.NO_SOLUTION:
            plans.append("newton-escape")
        else:
            if entry.regime is corpus.Regime.GLOBAL_HOMEOMORPHISM or md.claims_global_homeomorphism:
                plans.append("newton")
            if md.claims_monotone:
                plans.append("regularized")
        for plan in plans:
            solver = "newton" if plan.startswith("newton") else "regularized"
            sub = RunConfig(entry.name, solver, rc.u0, rc.a0, rc.b, dict(rc.overrides),
                            rc.checkpoints, rc.out_dir, f"all/{entry.name}-{solver}")
            cfg = build_config(entry, sub)
            code, report, payload = execute(entry, sub, parse_u0(sub.u0, entry.problem.dimension),
                                            cfg, build_schedule(entry, sub), True,
                                            root / sub.run_id)
            if plan == "newton-escape":
                passed = (report.stop_reason is StopReason.DIVERGED
                          and report.extras.get("residual_decreasing", False))
            else:
                passed = code == EXIT_OK
            ok &= passed
            print(f"{'PASS' if passed else 'FAIL'} " + _summary_line(sub, report, code, payload))
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def run_list(regime=None, as_json=False):
    try:
        entries = corpus.list_entries(regime)
    except ValueError:
        raise ConfigError(
            f"unknown regime {regime!r}; choose from {[r.value for r in corpus.Regime]}")
    if as_json:
        doc = [{"name": e.name, "regime": e.regime.value, "dimension": e.problem.dimension,
                "claims_monotone": e.problem.metadata.claims_monotone,
                "claims_global_homeomorphism": e.problem.metadata.claims_global_homeomorphism,
                "satisfies_preimage_bound": e.problem.metadata.satisfies_preimage_bound,
                "coercive": e.coercive, "notes": e.notes} for e in entries]
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    width = max((len(e.name) for e in entries), default=4)
    print(f"{'name':<{width}}  {'regime':<22}  {'n':>3}  monotone  homeomorphism")
    for e in entries:
        md = e.problem.metadata
        print(f"{e.name:<{width}}  {e.regime.value:<22}  {e.problem.dimension:>3}  "
              f"{'yes' if md.claims_monotone else 'no':<8}  "
              f"{'yes' if md.claims_global_homeomorphism else 'no'}")
    return EXIT_OK


COMPARE_COLUMNS = ("method",) + TRACE_COLUMNS


def run_compare(rc: RunConfig):
    """Newton flow, regularized flow and discrete Newton from the same start."""
    entry = corpus.get(rc.problem_name)
    problem = entry.problem
    u0 = parse_u0(rc.u0, problem.dimension)
    rc.run_id = rc.run_id or f"{entry.name}-compare"
    newton_rc = RunConfig(entry.name, "newton", overrides=rc.overrides,
                          checkpoints=rc.checkpoints)
    reg_rc = RunConfig(entry.name, "regularized", a0=rc.a0, b=rc.b,
                       overrides=rc.overrides)
    newton_cfg = build_config(entry, newton_rc)
    reg_cfg = build_config(entry, reg_rc)
    schedule = build_schedule(entry, reg_rc)

    rows, methods = [], {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for method, report, regularized in (
            ("newton-flow", solve_newton_dsm(problem, u0, newton_cfg, checks=False), False),
            ("regularized-flow", solve_regularized_dsm(problem, u0, schedule, reg_cfg), True),
        ):
            for row in trace_rows(report.trajectory, regularized):
                rows.append({"method": method, **row})
            methods[method] = {
                "stop_reason": report.stop_reason.value,
                "converged": report.converged,
                "final_residual_norm": report.trajectory.residual_norm[-1],
                "final_u_norm": report.trajectory.u_norm[-1],
                "final_t": report.trajectory.final_t,
                "notes": report.notes,
            }
    iterates, res, reason = discrete_newton(problem, u0, newton_cfg)
    for k, (u, r) in enumerate(zip(iterates, res)):
        rows.append({"method": "discrete-newton", "t": repr(float(k)), "residual_norm": repr(float(r)),
                     "u_norm": repr(float(np.linalg.norm(u))), "a": "", "ratio_v_over_a": "",
                     "step": repr(0.0 if k == 0 else 1.0)})
    methods["discrete-newton"] = {
        "stop_reason": reason.value,
        "converged": reason is StopReason.RESIDUAL_CONVERGED,
        "final_residual_norm": res[-1],
        "final_u_norm": float(np.linalg.norm(iterates[-1])),
        "iterations": len(iterates) - 1,
    }
    run_dir = _output_root(rc) / rc.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    write_rows_csv(run_dir / "compare.csv", COMPARE_COLUMNS, rows)
    write_report_json(run_dir / "report.json", {
        "run_id": rc.run_id, "problem": entry.name, "regime": entry.regime.value,
        "u0": u0, "methods": methods})
    for name, m in methods.items():
        print(f"{name:<17} {m['stop_reason']:<18} residual={m['final_residual_norm']:.3e} "
              f"|u|={m['final_u_norm']:.4g}")
    return EXIT_OK


def _add_run_args(p, solver=True):
    p.add_argument("--problem", help="corpus problem name (see `dsmflow list`)")
    if solver:
        p.add_argument("--solver", choices=("newton", "regularized"), default="newton")
    p.add_argument("--u0", default="zero",
                   help="zero | ones | ones*K | comma-separated vector (default: zero)")
    p.add_argument("--a0", type=float, help="schedule a(t)=a0 (1+t)^-b, a0 > 0")
    p.add_argument("--b", type=float, help="schedule exponent, 0 < b <= 1")
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--hmax", type=float)
    p.add_argument("--t-max", type=float, dest="t_max")
    p.add_argument("--residual-stop", type=float, dest="residual_stop")
    p.add_argument("--divergence-norm", type=float, dest="divergence_norm")
    p.add_argument("--checkpoints", help="comma-separated checkpoint times")
    p.add_argument("--out-dir", type=Path, dest="out_dir",
                   help=f"output directory (default: ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    p.add_argument("--run-id", dest="run_id")


def build_parser():
    parser = _Parser(prog="dsmflow", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list", help="list corpus problems")
    p.add_argument("--regime", choices=[r.value for r in corpus.Regime])
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("solve", help="run one flow")
    _add_run_args(p)
    p.add_argument("--u0-sweep", type=int, default=0, dest="sweep",
                   help="run K fixed-seed random starts with ||u0|| <= 10")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("diagnose", help="solve, then run the diagnostic battery")
    _add_run_args(p)
    p.add_argument("--u0-sweep", type=int, default=0, dest="sweep")
    p.add_argument("--seed", type=int)
    p.add_argument("--all", action="store_true", help="every corpus problem")
    p.add_argument("--inject-corrupt-trace", action="store_true",
                   help=argparse.SUPPRESS)

    p = sub.add_parser("compare", help="Newton flow vs regularized flow vs discrete Newton")
    _add_run_args(p, solver=False)
    return parser


def _run_config(args):
    overrides = {k: getattr(args, k) for k in
                 ("rtol", "atol", "hmax", "t_max", "residual_stop", "divergence_norm")}
    return RunConfig(
        problem_name=args.problem,
        solver=getattr(args, "solver", "newton"),
        u0=args.u0, a0=args.a0, b=args.b, overrides=overrides,
        checkpoints=_parse_grid(args.checkpoints), out_dir=args.out_dir,
        run_id=args.run_id, sweep=getattr(args, "sweep", 0) or 0,
        seed=getattr(args, "seed", None),
        inject_corrupt_trace=getattr(args, "inject_corrupt_trace", False),
    )


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "list":
            return run_list(args.regime, args.json)
        rc = _run_config(args)
        if args.command == "diagnose" and args.all:
            return run_diagnose_all(rc)
        if not rc.problem_name:
            raise ConfigError("--problem is required")
        if rc.sweep < 0:
            raise ConfigError("--u0-sweep must be nonnegative")
        if args.command == "solve":
            return run_solve(rc)
        if args.command == "diagnose":
            return run_solve(rc, diagnose=True)
        return run_compare(rc)
    except (ConfigError, UnknownProblem, InvalidConfig) as exc:
        print(f"dsmflow: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
