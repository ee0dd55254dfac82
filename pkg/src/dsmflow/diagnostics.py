"""Post-hoc certificates over trajectories and problems.

Every check returns a :class:`DiagnosticResult` with ``passed`` iff
``measured <= threshold``. ``regime`` says where the tolerance comes from:
``"integrator"`` (tight, limited by integration error),
``"finite-difference"`` (loose, limited by differencing a sampled trace),
``"witness"`` (finite sampling: a pass is evidence, a fail is a
counterexample at the probe point) or ``"exact"``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (PROBE_SEED, OperatorProblem, check_jacobian, jacobian_at, norm,
                   probe_points, residual)
from .errors import InsufficientSamples, SingularMatrix
from .integrate import Trajectory
from .linalg import operator_norm_of_inverse
from .stationary import solve_stationary

__all__ = [
    "DiagnosticResult",
    "check_residual_decay",
    "residual_noise_floor",
    "run_battery",
    "check_tracking_bound",
    "check_ratio_decay",
    "check_v_equation",
    "check_inverse_bound",
    "check_monotonicity",
    "check_jacobian_probes",
    "probe_coercivity",
    "fd_weights",
]


@dataclass
class DiagnosticResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    regime: str = "integrator"
    details: list = field(default_factory=list)
    note: str = ""

    def as_dict(self):
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "measured": _jsonable(self.measured),
            "threshold": _jsonable(self.threshold),
            "regime": self.regime,
            "note": self.note,
            "details": [{k: _jsonable(v) for k, v in row.items()} for row in self.details],
        }


def _jsonable(x):
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    return x


def _result(name, measured, threshold, **kw):
    return DiagnosticResult(name, bool(measured <= threshold), float(measured),
                            float(threshold), **kw)


def residual_noise_floor(problem: OperatorProblem, u, rel=1e-6):
    """Residual size below which rounding in ``F(u) - f`` alone produces a
    relative error of ``rel``: ``eps/rel * (||F'(u)|| ||u|| + ||f||)``."""
    J = jacobian_at(problem, u)
    scale = np.linalg.norm(J, 2) * np.linalg.norm(u) + np.linalg.norm(problem.rhs_f)
    return float(np.finfo(float).eps / rel * scale)


def check_residual_decay(traj: Trajectory, atol=1e-12, threshold=1e-6, floor=0.0):
    """Newton-flow residuals must follow ``||v(t)|| = ||v(0)|| e^{-t}``.

    Measured: the worst ``|ln r(t) - ln r(0) + t|`` over checkpoints with
    ``r(t) >= max(100 atol, floor)``. Pass ``floor=residual_noise_floor(...)``
    to exclude samples where the residual is rounding noise.
    """
    r = traj.residual_norm
    cutoff = max(100 * atol, floor)
    cp = [i for i in traj.checkpoint_indices() if traj.t[i] > 0 and r[i] >= cutoff]
    if len(cp) < 3:
        raise InsufficientSamples(
            f"residual decay needs >= 3 eligible checkpoints, found {len(cp)}")
    if not r[0] > 0:
        raise InsufficientSamples("initial residual is zero")
    ln0 = np.log(r[0])
    rows = []
    for i in cp:
        dev = abs(np.log(r[i]) - ln0 + traj.t[i])
        rows.append({"t": traj.t[i], "residual_norm": r[i],
                     "predicted": r[0] * np.exp(-traj.t[i]), "log_deviation": dev})
    measured = max(row["log_deviation"] for row in rows)
    return _result("residual_decay", measured, threshold, details=rows)


def check_tracking_bound(traj: Trajectory, problem: OperatorProblem, schedule,
                         atol=1e-12, stationary=solve_stationary):
    """``||u(t) - w(t)|| <= ||v(t)|| / a(t)`` at every checkpoint, where ``w``
    solves ``F(w) + a(t) w = f`` and ``v = F(u) + a(t) u - f``.

    Slack: ``(1 + 1e-6) ||v||/a + 10 atol``. Measured is the worst ratio of
    the left side to the slackened bound, so the threshold is 1.
    """
    cp = [i for i in traj.checkpoint_indices()]
    if not cp:
        raise InsufficientSamples("trajectory has no checkpoints")
    rows = []
    for i in cp:
        t, u = traj.t[i], traj.u[i]
        a = schedule(t)
        v = residual(problem, u) + a * u
        bound = norm(v) / a
        w = stationary(problem, a, u)
        gap = norm(u - w)
        slack = (1 + 1e-6) * bound + 10 * atol
        rows.append({"t": t, "a": a, "distance_to_w": gap, "bound": bound,
                     "ratio": gap / slack})
    measured = max(row["ratio"] for row in rows)
    return _result("tracking_bound", measured, 1.0, details=rows)


def check_ratio_decay(traj: Trajectory, checkpoints=(10.0, 50.0, 100.0, 200.0),
                      ceiling=1e-2):
    """``||v||/a`` must decrease strictly over ``checkpoints`` and end below
    ``ceiling``.

    Measured counts violations (non-decreasing pairs, plus one if the final
    value exceeds the ceiling); threshold 0.
    """
    ratio = traj.flow_residual_norm / traj.a_value
    rows = []
    for t in checkpoints:
        try:
            i = traj.index_at(t)
        except KeyError:
            continue
        rows.append({"t": t, "a": traj.a_value[i], "v_norm": traj.flow_residual_norm[i],
                     "ratio": ratio[i]})
    if len(rows) < len(checkpoints) or len(rows) < 2:
        raise InsufficientSamples(
            f"ratio decay needs samples at {list(checkpoints)}; found "
            f"{[row['t'] for row in rows]}")
    vals = [row["ratio"] for row in rows]
    violations = sum(1 for x, y in zip(vals, vals[1:]) if not y < x)
    violations += int(not vals[-1] <= ceiling)
    return _result("ratio_decay", violations, 0, regime="exact", details=rows,
                   note=f"final ||v||/a = {vals[-1]:.3e}, ceiling {ceiling:g}")


def fd_weights(x, x0):
    """Weights ``c`` with ``sum c_j g(x_j) ~ g'(x0)``, exact for polynomials of
    degree ``len(x) - 1``."""
    x = np.asarray(x, dtype=float) - x0
    m = x.size
    V = np.vander(x, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs)


def check_v_equation(traj: Trajectory, problem: OperatorProblem, schedule,
                     threshold=1e-3, window=1.0):
    """``dv/dt = -v + a'(t) u`` along the regularized flow.

    ``v = F(u) + a u - f`` is recomputed at the checkpoints and differentiated
    with a five-point stencil. Stencils spanning more than ``window`` time
    units are skipped: coarse checkpoints measure truncation error of the
    stencil, not the flow.
    """
    cp = traj.checkpoint_indices()
    if len(cp) < 5:
        raise InsufficientSamples("v-equation check needs >= 5 checkpoints")
    ts = traj.t[cp]
    V = np.array([residual(problem, traj.u[i]) + schedule(traj.t[i]) * traj.u[i]
                  for i in cp])
    rows = []
    for k in range(2, len(cp) - 2):
        sl = slice(k - 2, k + 3)
        if window is not None and ts[k + 2] - ts[k - 2] > window:
            continue
        c = fd_weights(ts[sl], ts[k])
        vdot = c @ V[sl]
        t = ts[k]
        u = traj.u[cp[k]]
        expected = -V[k] + schedule.derivative(t) * u
        scale = norm(V[k]) + abs(schedule.derivative(t)) * norm(u)
        rel = norm(vdot - expected) / scale if scale > 0 else 0.0
        rows.append({"t": t, "fd_norm": norm(vdot),
                     "expected_norm": norm(expected), "relative_error": rel})
    if len(rows) < 1:
        raise InsufficientSamples(
            f"no five-checkpoint stencil fits within a window of {window}")
    measured = max(row["relative_error"] for row in rows)
    return _result("v_equation", measured, threshold, regime="finite-difference",
                   details=rows)


def check_inverse_bound(problem: OperatorProblem, probes=None, a_values=(1.0, 0.1, 0.01),
                        tol=1e-9):
    """``||(F'(u) + aI)^{-1}|| <= 1/a`` at probe points.

    Measured: worst ``||(J + aI)^{-1}|| - 1/a``; a singular ``J + aI`` counts
    as an infinite norm.
    """
    if probes is None:
        probes = probe_points(problem.dimension)
    rows = []
    for u in probes:
        J = jacobian_at(problem, u)
        for a in a_values:
            try:
                norm = operator_norm_of_inverse(J, a)
            except SingularMatrix:
                norm = np.inf
            rows.append({"a": a, "inverse_norm": norm, "bound": 1.0 / a,
                         "margin": norm - 1.0 / a})
    measured = max(row["margin"] for row in rows)
    return _result("inverse_bound", measured, tol, regime="witness", details=rows)


def check_monotonicity(problem: OperatorProblem, probes=None, tol=1e-10):
    """Smallest eigenvalue of the symmetric part of ``F'(u)`` at probe points
    must be ``>= -tol``. Measured: the negated worst eigenvalue."""
    if probes is None:
        probes = probe_points(problem.dimension)
    rows = []
    for u in probes:
        J = jacobian_at(problem, u)
        lam = np.linalg.eigvalsh(0.5 * (J + J.T))[0]
        rows.append({"min_eig_sym": lam})
    measured = -min(row["min_eig_sym"] for row in rows)
    return _result("monotonicity", measured, tol, regime="witness", details=rows)


def check_jacobian_probes(problem: OperatorProblem, probes=None, tol=1e-5):
    """Analytic Jacobian vs central differences at probe points."""
    if probes is None:
        probes = probe_points(problem.dimension)
    rows = []
    for u in probes:
        rep = check_jacobian(problem, u, tol)
        rows.append({"max_discrepancy": rep.max_discrepancy})
    measured = max(row["max_discrepancy"] for row in rows)
    return _result("jacobian_check", measured, tol, regime="finite-difference",
                   details=rows)


def probe_coercivity(problem: OperatorProblem, radii=(1.0, 10.0, 100.0, 1000.0),
                     n_random=8, seed=PROBE_SEED):
    """Sample ``(F(u), u)/||u||`` on spheres of growing radius.

    Directions: the coordinate axes with both signs plus ``n_random`` fixed-seed
    random unit vectors. Passes iff the per-radius minimum is strictly
    increasing and positive at the largest radius; measured counts the
    violations. Not conclusive either way about the limit.
    """
    n = problem.dimension
    rng = np.random.default_rng(seed)
    rand = rng.standard_normal((n_random, n))
    rand /= np.linalg.norm(rand, axis=1, keepdims=True)
    dirs = np.vstack([np.eye(n), -np.eye(n), rand])
    rows = []
    for r in radii:
        vals = []
        for d in dirs:
            u = r * d
            with np.errstate(over="ignore", invalid="ignore"):
                Fu = np.asarray(problem.evaluate_F(u), dtype=float)
                q = float(Fu @ u) / r
            vals.append(q if not np.isnan(q) else -np.inf)
        rows.append({"radius": r, "min_quotient": min(vals)})
    q = [row["min_quotient"] for row in rows]
    violations = sum(1 for x, y in zip(q, q[1:]) if not y > x) + int(not q[-1] > 0)
    return _result("coercivity_witness", violations, 0, regime="witness", details=rows,
                   note="finite-sample witness; not a proof of coercivity")


def run_battery(problem: OperatorProblem, report, schedule=None, atol=1e-12,
                coercive=False):
    """Every applicable check for a finished solve.

    Returns ``(results, skipped)``; ``skipped`` lists ``(name, reason)`` for
    checks the trajectory cannot support (too short, too few checkpoints).
    """
    traj = report.trajectory
    results, skipped = [], []

    def attempt(name, fn, *args, **kw):
        try:
            results.append(fn(*args, **kw))
        except InsufficientSamples as exc:
            skipped.append((name, str(exc)))

    if report.solver == "newton":
        attempt("residual_decay", check_residual_decay, traj, atol=atol,
                floor=residual_noise_floor(problem, traj.final_u))
    else:
        attempt("tracking_bound", check_tracking_bound, traj, problem, schedule, atol=atol)
        attempt("ratio_decay", check_ratio_decay, traj)
        attempt("v_equation", check_v_equation, traj, problem, schedule)
    if problem.has_analytic_jacobian:
        results.append(check_jacobian_probes(problem))
    if problem.metadata.claims_monotone:
        results.append(check_monotonicity(problem))
        if report.solver != "newton":
            results.append(check_inverse_bound(problem))
    if coercive:
        results.append(probe_coercivity(problem))
    return results, skipped
