"""Dynamical-systems solvers for nonlinear equations ``F(u) = f`` on R^n.

The continuous Newton flow ``u' = -[F'(u)]^{-1}(F(u) - f)`` and, for monotone
``F``, the regularized flow ``u' = -[F'(u) + a(t) I]^{-1}(F(u) + a(t) u - f)``
whose limit is the minimal-norm solution.
"""
from .core import OperatorProblem, ProblemMetadata, check_jacobian, jacobian_at, residual
from .errors import (DSMError, InsufficientSamples, InvalidConfig, InvalidSchedule,
                     NoConvergence, NonFiniteInput, NonFiniteOutput, NotInRange,
                     SingularMatrix, UnknownProblem)
from .integrate import IntegratorConfig, StopReason, Trajectory, euler_step, integrate
from .linalg import SolveOutcome, operator_norm_of_inverse, solve, solve_regularized
from .solvers import (DEFAULT_SCHEDULE, PowerLawSchedule, SolveReport, discrete_newton,
                      newton_flow_rhs, regularized_flow_rhs, schedule_eval,
                      solve_newton_dsm, solve_regularized_dsm)
from .stationary import (StationaryPath, minimal_norm_oracle_linear, solve_stationary,
                         trace_path)

__version__ = "0.1.0"
