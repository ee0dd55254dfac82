"""Built-in problems covering each hypothesis regime of the two flows."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType

import numpy as np

from .core import OperatorProblem, ProblemMetadata
from .errors import UnknownProblem

__all__ = [
    "Regime",
    "CorpusEntry",
    "get",
    "list_entries",
    "names",
    "negative_control",
    "laplacian_1d",
]


class Regime(str, Enum):
    GLOBAL_HOMEOMORPHISM = "GlobalHomeomorphism"
    MONOTONE_UNIQUE = "MonotoneUnique"
    MONOTONE_NON_INJECTIVE = "MonotoneNonInjective"
    NO_SOLUTION = "NoSolution"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class CorpusEntry:
    """A registered problem.

    ``coercive`` records whether ``(F(u), u)/||u|| -> inf`` holds (checked only
    by a sampling witness). ``config_hints`` are integrator overrides the CLI
    applies by default for this problem; ``schedule`` is the recommended
    ``(a0, b)`` for the regularized flow.
    """

    name: str
    problem: OperatorProblem
    regime: Regime
    notes: str
    coercive: bool = False
    config_hints: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))
    schedule: tuple = (1.0, 0.5)


def _linear(name, A, f, **md):
    A = np.array(A, dtype=float)
    A.setflags(write=False)
    return OperatorProblem(
        dimension=A.shape[0],
        evaluate_F=lambda u: A @ u,
        jacobian=lambda u: A,
        rhs_f=f,
        metadata=ProblemMetadata(**md),
        name=name,
    )


def laplacian_1d(n):
    """Standard 3-point ``-d^2/dx^2`` on ``n`` interior nodes of [0, 1],
    zero boundary values, mesh width ``1/(n+1)``."""
    h = 1.0 / (n + 1)
    L = (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2
    return L


def _cubic_pde(n=50):
    L = laplacian_1d(n)
    L.setflags(write=False)
    x = np.arange(1, n + 1) / (n + 1)
    exact = np.sin(np.pi * x)

    def F(u):
        return L @ u + u**3

    def J(u):
        return L + np.diag(3.0 * u**2)

    # applying the discrete operator makes the nodal sine exact for the discrete system
    g = F(exact)
    md = ProblemMetadata(
        claims_monotone=True,
        claims_global_homeomorphism=True,
        known_solution=exact,
        known_minimal_norm_solution=exact,
        satisfies_preimage_bound=True,
    )
    return OperatorProblem(n, F, g, J, md, name="cubic-monotone-pde")


def _exp_scalar(f, name, **md):
    return OperatorProblem(
        dimension=1,
        evaluate_F=np.exp,
        jacobian=lambda u: np.exp(u).reshape(1, 1),
        rhs_f=[f],
        metadata=ProblemMetadata(**md),
        name=name,
    )


def _build():
    third = np.full(2, 1.0 / 3.0)
    skew = np.array([[0.0, 1.0], [-1.0, 0.0]])
    skew_op = np.eye(2) + 2.0 * skew
    skew_f = np.array([1.0, 1.0])
    entries = [
        CorpusEntry(
            "linear-spd-2",
            _linear("linear-spd-2", [[2.0, 1.0], [1.0, 2.0]], [1.0, 1.0],
                    claims_monotone=True, claims_global_homeomorphism=True,
                    known_solution=third, known_minimal_norm_solution=third,
                    satisfies_preimage_bound=True),
            Regime.GLOBAL_HOMEOMORPHISM,
            "SPD linear map: a global homeomorphism with constant bounded inverse; "
            "also monotone with a unique solution. Coercive.",
            coercive=True,
        ),
        CorpusEntry(
            "exp-scalar",
            _exp_scalar(2.0, "exp-scalar", claims_monotone=True,
                        known_solution=[np.log(2.0)],
                        known_minimal_norm_solution=[np.log(2.0)]),
            Regime.GLOBAL_HOMEOMORPHISM,
            "F(u)=e^u, f=2. Domain caveat: F maps R onto (0, inf), not onto R, so it "
            "is not a global homeomorphism of R; for f > 0 the Newton flow stays in "
            "the reachable set and e^{u(t)} = 2 + (e^{u0} - 2) e^{-t} in closed form. "
            "Not coercive.",
        ),
        CorpusEntry(
            "exp-no-solution",
            _exp_scalar(0.0, "exp-no-solution", claims_monotone=True),
            Regime.NO_SOLUTION,
            "F(u)=e^u, f=0: monotone with F'(u) boundedly invertible at every u, yet "
            "e^u = 0 has no solution because preimages of bounded sets are "
            "unbounded. The Newton flow escapes as u(t) = u0 - t.",
            # The residual e^{-t} reaches 1e-10 near t = 23; the escape has to be
            # caught before that, so the threshold sits at the scale of ln(stop).
            config_hints=MappingProxyType({"divergence_norm": 20.0}),
        ),
        CorpusEntry(
            "rank-deficient-psd",
            _linear("rank-deficient-psd", np.diag([1.0, 0.0]), [1.0, 0.0],
                    claims_monotone=True, known_solution=[1.0, 0.0],
                    known_minimal_norm_solution=[1.0, 0.0]),
            Regime.MONOTONE_NON_INJECTIVE,
            "A=diag(1,0), f=(1,0): solution set {(1, s)}; minimal-norm element "
            "y=(1,0). F'(u) is singular, so only the regularized flow applies.",
        ),
        CorpusEntry(
            "cubic-monotone-pde",
            _cubic_pde(50),
            Regime.MONOTONE_UNIQUE,
            "-u'' + u^3 = g on [0,1], zero boundary, 50 interior nodes, 3-point "
            "Laplacian; g manufactured from the discrete operator so u = sin(pi x) "
            "is exact at the nodes. Monotone, coercive, global homeomorphism.",
            coercive=True,
            # ||v||/a ~ b ||u|| / (1 + t) late in the run and ||y|| ~ 5, so b = 1/2
            # leaves ||v||/a near 1.3e-2 at t = 200
            schedule=(1.0, 0.25),
        ),
        CorpusEntry(
            "skew-monotone",
            _linear("skew-monotone", skew_op, skew_f,
                    claims_monotone=True, claims_global_homeomorphism=True,
                    known_solution=np.linalg.solve(skew_op, skew_f),
                    known_minimal_norm_solution=np.linalg.solve(skew_op, skew_f),
                    satisfies_preimage_bound=True),
            Regime.MONOTONE_UNIQUE,
            "F(u) = u + 2Mu with M = [[0,1],[-1,0]]: monotone (symmetric part I) "
            "with a non-symmetric Jacobian. Coercive.",
            coercive=True,
        ),
    ]
    return MappingProxyType({e.name: e for e in entries})


_REGISTRY = _build()


def get(name) -> CorpusEntry:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownProblem(
            f"unknown problem {name!r}; available: {', '.join(_REGISTRY)}") from None


def list_entries(regime=None):
    entries = list(_REGISTRY.values())
    if regime is not None:
        regime = Regime(regime)
        entries = [e for e in entries if e.regime is regime]
    return entries


def names():
    return list(_REGISTRY)


def negative_control(kind):
    """Deliberately broken fixtures that the checks must reject.

    ``"non-monotone"``: F(u) = -u on R^2. ``"wrong-jacobian"``: F(u) = u^3
    (componentwise) with a Jacobian of 2 diag(u^2).
    """
    if kind == "non-monotone":
        return OperatorProblem(
            2, lambda u: -u, np.zeros(2), lambda u: -np.eye(2),
            ProblemMetadata(claims_monotone=True), name="non-monotone")
    if kind == "wrong-jacobian":
        return OperatorProblem(
            2, lambda u: u**3, np.zeros(2), lambda u: np.diag(2.0 * u**2),
            ProblemMetadata(), name="wrong-jacobian")
    raise ValueError(f"unknown negative control {kind!r}")
