import math

import numpy as np
import pytest

from ensembleqc.fock import ModeRegister, apply_creation, vacuum_state

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_qubit(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


def random_vector(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_unitary(rng, n):
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / abs(d))


def ket(register: ModeRegister, *creations, coeff=1.0):
    """coeff * (product of creation operators)|vac>, built ladder by ladder."""
    state = vacuum_state(register)
    for label in creations:
        state = apply_creation(state, label)
    return state.scaled(coeff)


def ket_sum(register, terms):
    """Sum of ``(coeff, [labels])`` monomials on the vacuum."""
    out = None
    for coeff, labels in terms:
        k = ket(register, *labels, coeff=coeff)
        out = k if out is None else out + k
    return out
