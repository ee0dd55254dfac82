"""The stationary regularized equation F(w) + a w = f and its solution path."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import OperatorProblem, as_matrix, as_vector, jacobian_at, residual
from .errors import NoConvergence, NonFiniteOutput, NotInRange
from .linalg import solve_regularized

__all__ = [
    "StationaryPath",
    "solve_stationary",
    "trace_path",
    "geometric_grid",
    "minimal_norm_oracle_linear",
]

STATIONARY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class StationaryPath:
    a: np.ndarray  # strictly decreasing
    w: np.ndarray  # one row per entry of ``a``

    def __len__(self):
        return self.a.shape[0]

    def __iter__(self):
        return iter(zip(self.a, self.w))


def solve_stationary(problem: OperatorProblem, a, warm_start, tol=STATIONARY_TOL,
                     max_iter=100, armijo_c=1e-4, min_step=2.0 ** -30):
    """Damped Newton for ``G(w) = F(w) + a w - f = 0`` with Armijo backtracking
    on ``||G||^2``.

    Independent of the flow machinery on purpose: it is the reference the
    tracking-bound check compares trajectories against.
    """
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    w = as_vector(warm_start, problem.dimension, "warm_start")

    def G(x):
        return residual(problem, x) + a * x

    g = G(w)
    phi = float(g @ g)
    for _ in range(max_iter):
        if np.sqrt(phi) <= tol:
            return w
        J = jacobian_at(problem, w)
        d = -solve_regularized(J, a, g).solution
        s = 1.0
        while True:
            trial = w + s * d
            try:
                g_trial = G(trial)
                phi_trial = float(g_trial @ g_trial)
            except NonFiniteOutput:
                phi_trial = np.inf
            # Newton direction: d/ds ||G(w + s d)||^2 at s=0 equals -2 ||G||^2
            if phi_trial <= (1.0 - 2.0 * armijo_c * s) * phi:
                break
            s *= 0.5
            if s < min_step:
                break
        if s < min_step:
            if phi_trial < phi:
                w, g, phi = trial, g_trial, phi_trial
                continue
            raise NoConvergence(
                f"line search stalled at a={a:.3e} with ||G||={np.sqrt(phi):.3e}",
                a=a, residual=np.sqrt(phi))
        w, g, phi = trial, g_trial, phi_trial
    if np.sqrt(phi) <= tol:
        return w
    raise NoConvergence(
        f"damped Newton did not reach ||G|| <= {tol:g} in {max_iter} iterations "
        f"at a={a:.3e} (||G||={np.sqrt(phi):.3e})", a=a, residual=np.sqrt(phi))


def geometric_grid(a_start=1.0, a_end=1e-3, ratio=0.5):
    """Decreasing grid ``a_start, a_start*ratio, ...`` ending at ``a_end``."""
    if not (a_start > a_end > 0 and 0 < ratio < 1):
        raise ValueError("need a_start > a_end > 0 and 0 < ratio < 1")
    k = int(np.ceil(np.log(a_end / a_start) / np.log(ratio)))
    grid = a_start * ratio ** np.arange(k)
    return np.append(grid[grid > a_end], a_end)


def trace_path(problem: OperatorProblem, a_grid, start) -> StationaryPath:
    """Continuation along a decreasing ``a_grid``, each solve warm-started from
    the previous one."""
    a_grid = np.asarray(a_grid, dtype=float)
    if a_grid.ndim != 1 or a_grid.size == 0:
        raise ValueError("a_grid must be a non-empty 1-d sequence")
    if np.any(a_grid <= 0) or np.any(np.diff(a_grid) >= 0):
        raise ValueError("a_grid must be strictly decreasing and positive")
    w = as_vector(start, problem.dimension, "start")
    ws = []
    for a in a_grid:
        w = solve_stationary(problem, float(a), w)
        ws.append(w)
    return StationaryPath(a_grid.copy(), np.array(ws))


def minimal_norm_oracle_linear(A, f, eig_tol=1e-12, range_tol=1e-10):
    """Minimal-norm solution of ``A x = f`` for symmetric PSD ``A``.

    Pseudoinverse through the eigendecomposition, dropping eigenvalues
    ``<= eig_tol``. Raises NotInRange if ``f`` has a component outside
    range(A) larger than ``range_tol``.
    """
    A = as_matrix(A, name="A")
    f = as_vector(f, A.shape[0], "f")
    if not np.allclose(A, A.T, rtol=0, atol=1e-14 * max(1.0, np.abs(A).max())):
        raise ValueError("A must be symmetric")
    lam, Q = np.linalg.eigh(A)
    if lam[0] < -eig_tol:
        raise ValueError(f"A is not positive semidefinite (eigenvalue {lam[0]:.3e})")
    keep = lam > eig_tol
    coef = Q.T @ f
    outside = float(np.linalg.norm(coef[~keep]))
    if outside > range_tol:
        raise NotInRange(f"f has a component of norm {outside:.3e} outside range(A)")
    return Q[:, keep] @ (coef[keep] / lam[keep])
