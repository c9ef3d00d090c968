import numpy as np
import pytest

from slowfast.markov import StateSpace, TransitionFamily
from slowfast.simulate import DriftField, SlowFastModel

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def two_state_class_model(lam=1.0, drift=(1.0, -1.0), p=0.3, q=0.1, dependent=False):
    """One transient state feeding a single 2-state class.

    States: 0 transient, 1 and 2 form the class with cross probabilities
    ``p`` (1 -> 2) and ``q`` (2 -> 1); stationary law ``(q, p) / (p + q)``.
    With ``dependent`` the cross probability ``p`` becomes ``p * (1 + tanh(x)) / 2``
    clipped away from zero, so the class law moves with ``x``.
    """
    def evaluate(x):
        pp = p * (1.0 + 0.5 * np.tanh(np.sum(x))) if dependent else p
        return np.array([[0.0, 0.5, 0.5],
                         [0.0, 1.0 - pp, pp],
                         [0.0, q, 1.0 - q]])
    fam = TransitionFamily(evaluate, 3, p if dependent else 0.0, not dependent)
    table = np.array([[0.0], [drift[0]], [drift[1]]])
    return SlowFastModel(DriftField.from_table(table), fam, lam, StateSpace(("t", "a", "b")), 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
