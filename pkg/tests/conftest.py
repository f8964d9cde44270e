import numpy as np
import pytest

from pstrata import ParameterSet, delta_from_vector, pi_from_rows

DELTA_NONMONO = (0.8, 0.5, 0.7, 0.3, 0.6, 0.1, 0.5, 0.2)
DELTA_MONO = (0.8, 0.5, 0.7, 0.3, 0.6, 0.1)


@pytest.fixture(scope="session")
def three_trial_params() -> ParameterSet:
    """Non-monotone three-trial design used throughout the worked examples."""
    return ParameterSet(
        p=np.full(3, 1.0 / 3.0),
        alpha=np.array([0.4, 0.5, 0.6]),
        pi=pi_from_rows(
            [(0.6, 0.2, 0.1, 0.1), (0.1, 0.6, 0.2, 0.1), (0.1, 0.1, 0.6, 0.2)], False
        ),
        delta=delta_from_vector(DELTA_NONMONO, False),
        monotonicity=False,
    )


@pytest.fixture(scope="session")
def three_trial_conditional() -> np.ndarray:
    """The conditional table P(Z,S,Y|R) implied by three_trial_params, as published.

    Indexed [z, s, y, r]; every entry is exact at three decimals.
    """
    q = np.zeros((2, 2, 2, 3))
    # r = 1
    q[1, 1, 1, 0], q[1, 1, 0, 0], q[1, 0, 1, 0], q[1, 0, 0, 0] = 0.248, 0.072, 0.044, 0.036
    q[0, 1, 1, 0], q[0, 1, 0, 0], q[0, 0, 1, 0], q[0, 0, 0, 0] = 0.192, 0.228, 0.042, 0.138
    # r = 2
    q[1, 1, 1, 1], q[1, 1, 0, 1], q[1, 0, 1, 1], q[1, 0, 0, 1] = 0.250, 0.100, 0.085, 0.065
    q[0, 1, 1, 1], q[0, 1, 0, 1], q[0, 0, 1, 1], q[0, 0, 0, 1] = 0.035, 0.065, 0.100, 0.300
    # r = 3
    q[1, 1, 1, 2], q[1, 1, 0, 2], q[1, 0, 1, 2], q[1, 0, 0, 2] = 0.090, 0.030, 0.276, 0.204
    q[0, 1, 1, 2], q[0, 1, 0, 2], q[0, 0, 1, 2], q[0, 0, 0, 2] = 0.036, 0.084, 0.036, 0.244
    return q


@pytest.fixture(scope="session")
def two_trial_monotone_params() -> ParameterSet:
    """Monotone two-trial design with closed-form identification."""
    return ParameterSet(
        p=np.array([0.5, 0.5]),
        alpha=np.array([0.4, 0.6]),
        pi=pi_from_rows([(0.7, 0.2, 0.1), (0.1, 0.2, 0.7)], True),
        delta=delta_from_vector(DELTA_MONO, True),
        monotonicity=True,
    )


def random_params(gen, n_trials: int, monotonicity: bool) -> ParameterSet:
    return ParameterSet.random(n_trials, monotonicity, gen)
