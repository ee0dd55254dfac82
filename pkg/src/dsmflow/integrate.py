"""Adaptive Dormand-Prince 5(4) integration with checkpoint landing."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .core import as_vector
from .errors import InvalidConfig, NonFiniteOutput, SingularMatrix

__all__ = [
    "StopReason",
    "IntegratorConfig",
    "Trajectory",
    "integrate",
    "euler_step",
]


class StopReason(str, Enum):
    RESIDUAL_CONVERGED = "ResidualConverged"
    HORIZON_REACHED = "HorizonReached"
    DIVERGED = "Diverged"
    STEP_UNDERFLOW = "StepUnderflow"
    LINEAR_SOLVE_FAILED = "LinearSolveFailed"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-9
    atol: float = 1e-12
    h0: float = 1e-3
    hmin: float = 1e-12
    hmax: float = 1.0
    t_max: float = 50.0
    residual_stop: float = 1e-10
    divergence_norm: float = 1e8
    checkpoint_grid: tuple = ()
    max_steps: int = 1_000_000

    def __post_init__(self):
        grid = tuple(float(t) for t in self.checkpoint_grid)
        object.__setattr__(self, "checkpoint_grid", grid)
        for name in ("rtol", "atol", "h0", "hmin", "hmax", "t_max",
                     "residual_stop", "divergence_norm"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise InvalidConfig(f"{name} must be a positive finite number, got {val!r}")
        if not self.hmin < self.h0 <= self.hmax:
            raise InvalidConfig(
                f"need hmin < h0 <= hmax, got {self.hmin}, {self.h0}, {self.hmax}"
            )
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidConfig("checkpoint_grid must be strictly increasing")
        if grid and (grid[0] < 0 or grid[-1] > self.t_max):
            raise InvalidConfig(f"checkpoint_grid must lie within [0, {self.t_max}]")
        if self.max_steps < 1:
            raise InvalidConfig("max_steps must be positive")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class Trajectory:
    """Samples of a flow, one row per accepted step plus t = 0.

    ``residual_norm`` is ||F(u) - f||. ``flow_residual_norm`` is the norm of
    the quantity the flow drives to zero: the same as ``residual_norm`` for
    the Newton flow, ``||F(u) + a u - f||`` for the regularized flow.
    """

    t: np.ndarray
    u: np.ndarray
    residual_norm: np.ndarray
    a_value: np.ndarray
    accepted_step: np.ndarray
    flow_residual_norm: np.ndarray
    is_checkpoint: np.ndarray

    def __len__(self):
        return self.t.shape[0]

    @property
    def final_u(self):
        return self.u[-1]

    @property
    def final_t(self):
        return float(self.t[-1])

    @property
    def u_norm(self):
        return np.linalg.norm(self.u, axis=1)

    def checkpoint_indices(self):
        return np.flatnonzero(self.is_checkpoint)

    def index_at(self, t):
        """Index of the sample recorded exactly at time ``t``."""
        hits = np.flatnonzero(self.t == t)
        if hits.size == 0:
            raise KeyError(f"no sample at t={t}")
        return int(hits[0])

    def copy(self):
        return Trajectory(**{f.name: getattr(self, f.name).copy()
                             for f in dataclasses.fields(self)})


class _Recorder:
    def __init__(self):
        self.rows = []

    def add(self, t, u, obs, step, checkpoint):
        self.rows.append((t, u.copy(), obs[0], obs[1], step, obs[2], checkpoint))

    def build(self):
        t, u, r, a, h, v, c = zip(*self.rows)
        return Trajectory(
            t=np.array(t), u=np.array(u), residual_norm=np.array(r, dtype=float),
            a_value=np.array(a, dtype=float), accepted_step=np.array(h),
            flow_residual_norm=np.array(v, dtype=float), is_checkpoint=np.array(c, dtype=bool),
        )


# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

_SAFETY = 0.9
_GROW = 5.0
_SHRINK = 0.1
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5


def _no_monitor(t, u):
    return (np.nan, 0.0, np.nan)


def _dp_step(rhs, t, u, k1, h):
    """One Dormand-Prince step. Returns (u_new, k_last, error_vector)."""
    K = [k1]
    for i in range(1, 7):
        incr = sum(a * k for a, k in zip(_A[i], K))
        K.append(np.asarray(rhs(t + _C[i] * h, u + h * incr), dtype=float))
    u_new = u + h * sum(b * k for b, k in zip(_B5[:6], K[:6]))
    err = h * sum(e * k for e, k in zip(_E, K) if e != 0.0)
    return u_new, K[6], err


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    u0,
    cfg: IntegratorConfig,
    monitor: Optional[Callable] = None,
    stop_on_residual: bool = True,
):
    """Integrate ``du/dt = rhs(t, u)`` from ``u0`` on ``[0, cfg.t_max]``.

    ``monitor(t, u)`` returns ``(residual_norm, a_value, flow_residual_norm)``
    for each recorded sample; the residual stop is tested on the first entry.
    Steps are shortened so that every checkpoint (and ``t_max``) is hit
    exactly. Returns ``(Trajectory, StopReason)``.
    """
    u = as_vector(u0, name="u0")
    monitor = monitor or _no_monitor
    grid = set(cfg.checkpoint_grid)
    targets = sorted(t for t in grid | {cfg.t_max} if t > 0)

    rec = _Recorder()
    t = 0.0
    rec.add(t, u, monitor(t, u), 0.0, 0.0 in grid)

    def status(u, obs):
        if np.linalg.norm(u) >= cfg.divergence_norm:
            return StopReason.DIVERGED
        if stop_on_residual and obs[0] <= cfg.residual_stop:
            return StopReason.RESIDUAL_CONVERGED
        return None

    reason = status(u, rec.rows[-1][2:])
    if reason is not None:
        return rec.build(), reason

    try:
        k1 = np.asarray(rhs(t, u), dtype=float)
    except SingularMatrix:
        return rec.build(), StopReason.LINEAR_SOLVE_FAILED

    h = min(cfg.h0, cfg.hmax)
    err_prev = 1e-4
    idx = 0
    for _ in range(cfg.max_steps):
        target = targets[idx]
        h_try = min(h, cfg.hmax)
        landing = t + h_try >= target * (1 - 4 * np.finfo(float).eps)
        if landing:
            h_try = target - t
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                u_new, k_last, err_vec = _dp_step(rhs, t, u, k1, h_try)
            finite = bool(np.all(np.isfinite(u_new)) and np.all(np.isfinite(err_vec)))
        except SingularMatrix:
            return rec.build(), StopReason.LINEAR_SOLVE_FAILED
        except NonFiniteOutput:
            finite = False

        if finite:
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(u), np.abs(u_new))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        else:
            err = np.inf

        if err <= 1.0:
            t = target if landing else t + h_try
            u = u_new
            k1 = k_last
            obs = monitor(t, u)
            rec.add(t, u, obs, h_try, landing and t in grid)
            reason = status(u, obs)
            if reason is not None:
                return rec.build(), reason
            if landing:
                idx += 1
                if idx == len(targets):
                    return rec.build(), StopReason.HORIZON_REACHED
            if err == 0.0:
                factor = _GROW
            else:
                factor = _SAFETY * err ** -_ALPHA * err_prev ** _BETA
                factor = min(_GROW, max(_SHRINK, factor))
            h_new = h_try * factor
            # a step shortened to land on a checkpoint must not shrink the proposal
            h = max(h, h_new) if landing else h_new
            err_prev = max(err, 1e-4)
        else:
            if np.isfinite(err):
                factor = max(_SHRINK, _SAFETY * err ** -0.2)
            else:
                factor = 0.25
            h = h_try * factor
            if h < cfg.hmin:
                return rec.build(), StopReason.STEP_UNDERFLOW
    return rec.build(), StopReason.STEP_UNDERFLOW


def euler_step(rhs, u, t, h):
    """``u + h * rhs(t, u)``."""
    if not h > 0:
        raise ValueError("h must be positive")
    u = np.asarray(u, dtype=float)
    return u + h * np.asarray(rhs(t, u), dtype=float)
