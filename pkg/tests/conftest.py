import warnings

import numpy as np
import pytest

from dsmflow import corpus


@pytest.fixture(autouse=True)
def _quiet_claim_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*does not claim", category=RuntimeWarning)
        yield


@pytest.fixture
def linear_spd():
    return corpus.get("linear-spd-2").problem


@pytest.fixture
def exp_scalar():
    return corpus.get("exp-scalar").problem


@pytest.fixture
def rank_deficient():
    return corpus.get("rank-deficient-psd").problem


@pytest.fixture
def cubic_pde():
    return corpus.get("cubic-monotone-pde").problem


def hand_solve_2x2(A, b):
    """Cramer's rule; independent of LAPACK."""
    (p, q), (r, s) = A
    det = p * s - q * r
    return np.array([(b[0] * s - q * b[1]) / det, (p * b[1] - r * b[0]) / det])
