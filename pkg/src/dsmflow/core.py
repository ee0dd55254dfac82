"""Operator problems F(u) = f on R^n, residuals and Jacobians."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NonFiniteInput, NonFiniteOutput

__all__ = [
    "ProblemMetadata",
    "OperatorProblem",
    "JacobianCheck",
    "as_vector",
    "norm",
    "as_matrix",
    "residual",
    "jacobian_at",
    "finite_difference_jacobian",
    "check_jacobian",
    "probe_points",
    "PROBE_SEED",
]

# Seed used by every sampling-based probe so results are reproducible.
PROBE_SEED = 20240101

_EPS = np.finfo(float).eps


def norm(x):
    """Euclidean norm that does not underflow for tiny entries."""
    x = np.asarray(x, dtype=float)
    m = np.max(np.abs(x)) if x.size else 0.0
    if m == 0.0 or not np.isfinite(m):
        return float(m)
    return float(m * np.linalg.norm(x / m))


def as_vector(u, n=None, name="u"):
    """Validate and copy ``u`` into a finite 1-d float array."""
    arr = np.array(u, dtype=float, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return arr


def as_matrix(J, n=None, name="J"):
    """Validate ``J`` as a finite square float matrix."""
    arr = np.array(J, dtype=float, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} is {arr.shape[0]}x{arr.shape[0]}, expected {n}x{n}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return arr


@dataclass(frozen=True, eq=False)
class ProblemMetadata:
    """Structural claims about a problem.

    Monotonicity and the global-homeomorphism property cannot be decided by
    computation; they are trusted claims that diagnostics spot-check.
    """

    claims_monotone: bool = False
    claims_global_homeomorphism: bool = False
    known_solution: Optional[np.ndarray] = None
    known_minimal_norm_solution: Optional[np.ndarray] = None
    satisfies_preimage_bound: bool = False


@dataclass(frozen=True, eq=False)
class OperatorProblem:
    """The equation ``F(u) = f`` on R^n.

    ``jacobian`` may be ``None``, in which case central finite differences
    are used. Instances are immutable and safe to share between threads.
    """

    dimension: int
    evaluate_F: Callable[[np.ndarray], np.ndarray]
    rhs_f: np.ndarray
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    metadata: ProblemMetadata = field(default_factory=ProblemMetadata)
    name: str = ""

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        f = as_vector(self.rhs_f, self.dimension, "rhs_f")
        f.setflags(write=False)
        object.__setattr__(self, "rhs_f", f)
        md = self.metadata
        for attr in ("known_solution", "known_minimal_norm_solution"):
            val = getattr(md, attr)
            if val is not None:
                val = as_vector(val, self.dimension, attr)
                val.setflags(write=False)
                object.__setattr__(md, attr, val)
        y = md.known_minimal_norm_solution
        if y is not None:
            r = np.linalg.norm(residual(self, y))
            if r > 1e-10:
                raise ValueError(
                    f"known_minimal_norm_solution does not solve F(y)=f (residual {r:.3e})"
                )

    @property
    def has_analytic_jacobian(self):
        return self.jacobian is not None

    def F(self, u):
        """Evaluate F and check the output is finite."""
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.asarray(self.evaluate_F(u), dtype=float).reshape(self.dimension)
        if not np.all(np.isfinite(out)):
            raise NonFiniteOutput(f"F({_short(u)}) is not finite")
        return out


def _short(u, k=4):
    u = np.asarray(u)
    s = np.array2string(u[:k], precision=4)
    return s if u.size <= k else s[:-1] + " ...]"


def residual(problem: OperatorProblem, u) -> np.ndarray:
    """Return ``F(u) - f``."""
    u = as_vector(u, problem.dimension)
    return problem.F(u) - problem.rhs_f


def finite_difference_jacobian(F, u):
    """Central differences with step ``sqrt(eps) * (1 + |u_i|)`` per coordinate."""
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    J = np.empty((n, n))
    steps = np.sqrt(_EPS) * (1.0 + np.abs(u))
    for i in range(n):
        h = steps[i]
        up = u.copy()
        um = u.copy()
        up[i] += h
        um[i] -= h
        # the actual spacing after rounding
        J[:, i] = (F(up) - F(um)) / (up[i] - um[i])
    return J


def jacobian_at(problem: OperatorProblem, u) -> np.ndarray:
    """F'(u): analytic when available, otherwise central finite differences."""
    u = as_vector(u, problem.dimension)
    if problem.jacobian is not None:
        with np.errstate(over="ignore", invalid="ignore"):
            J = np.array(problem.jacobian(u), dtype=float).reshape(
                problem.dimension, problem.dimension
            )
    else:
        J = finite_difference_jacobian(problem.F, u)
    if not np.all(np.isfinite(J)):
        raise NonFiniteOutput(f"F'({_short(u)}) is not finite")
    return J


@dataclass(frozen=True)
class JacobianCheck:
    passed: bool
    max_discrepancy: float
    tol: float
    worst_entry: tuple


def check_jacobian(problem: OperatorProblem, u, tol=1e-5) -> JacobianCheck:
    """Compare the analytic Jacobian against central finite differences.

    The discrepancy of each entry is measured relative to ``1 + |entry|``.
    """
    if problem.jacobian is None:
        raise ValueError("check_jacobian requires an analytic Jacobian")
    u = as_vector(u, problem.dimension)
    Ja = jacobian_at(problem, u)
    Jfd = finite_difference_jacobian(problem.F, u)
    rel = np.abs(Ja - Jfd) / (1.0 + np.abs(Ja))
    idx = np.unravel_index(np.argmax(rel), rel.shape)
    worst = float(rel[idx])
    return JacobianCheck(worst <= tol, worst, tol, tuple(int(i) for i in idx))


def probe_points(n, count=10, scale=1.0, seed=PROBE_SEED):
    """Fixed-seed probe points in R^n, standard normal times ``scale``."""
    rng = np.random.default_rng(seed)
    return scale * rng.standard_normal((count, n))
