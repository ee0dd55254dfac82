"""Dense linear solves used by the flows and by the diagnostics."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg.lapack import get_lapack_funcs

from .core import as_matrix, as_vector
from .errors import SingularMatrix

__all__ = [
    "SolveOutcome",
    "RCOND_MIN",
    "solve",
    "solve_regularized",
    "operator_norm_of_inverse",
]

# Reciprocal condition numbers below this are treated as singular.
RCOND_MIN = 1e-14


@dataclass(frozen=True, eq=False)
class SolveOutcome:
    solution: np.ndarray
    condition_estimate: float  # reciprocal 1-norm condition estimate


def _lu_rcond(J):
    anorm = np.linalg.norm(J, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(J, check_finite=False)
    if anorm == 0.0 or np.any(np.diag(lu) == 0.0):
        return lu, piv, 0.0
    (gecon,) = get_lapack_funcs(("gecon",), (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0:
        return lu, piv, 0.0
    return lu, piv, float(rcond)


def solve(J, b) -> SolveOutcome:
    """Solve ``J x = b`` by LU with partial pivoting.

    Raises SingularMatrix when the reciprocal condition estimate falls below
    ``RCOND_MIN``; the inverse the flow needs does not exist numerically there.
    """
    J = as_matrix(J)
    b = as_vector(b, J.shape[0], "b")
    lu, piv, rcond = _lu_rcond(J)
    if rcond < RCOND_MIN:
        raise SingularMatrix(
            f"matrix is singular to working precision (rcond={rcond:.2e})", rcond
        )
    x = sla.lu_solve((lu, piv), b, check_finite=False)
    return SolveOutcome(x, rcond)


def solve_regularized(J, a, b) -> SolveOutcome:
    """Solve ``(J + a I) x = b`` for ``a > 0``."""
    if not a > 0:
        raise ValueError(f"regularization parameter must be positive, got {a}")
    J = as_matrix(J)
    try:
        return solve(J + a * np.eye(J.shape[0]), b)
    except SingularMatrix as exc:
        raise SingularMatrix(
            f"J + aI is singular for a={a:.3e} although a > 0: the Jacobian is not "
            f"monotone at this point, so the monotonicity claim is false ({exc})",
            exc.rcond,
        ) from None


def operator_norm_of_inverse(J, a=0.0) -> float:
    """Spectral norm of ``(J + a I)^{-1}``, i.e. one over the smallest singular value."""
    if a < 0:
        raise ValueError("a must be nonnegative")
    J = as_matrix(J)
    M = J + a * np.eye(J.shape[0]) if a else J
    s = np.linalg.svd(M, compute_uv=False)
    smin, smax = s[-1], s[0]
    if smax == 0.0 or smin <= RCOND_MIN * smax:
        msg = f"J + aI is singular (a={a:.3e}, smallest singular value {smin:.3e})"
        if a > 0:
            msg += "; the monotonicity claim is false at this point"
        raise SingularMatrix(msg, 0.0 if smax == 0 else smin / smax)
    return float(1.0 / smin)
