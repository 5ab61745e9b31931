import itertools

import numpy as np
import pytest

from qproc.pauli import SparsePauliOp, enumerate_paulis
from qproc.states import STAB_BLOCH


def random_op(n, k, rng, density=0.5, identity=True):
    """Random real operator on Pauli words of weight <= k, coefficients in [-1, 1]."""
    terms = {}
    for p in enumerate_paulis(n, k):
        if p.weight == 0 and not identity:
            continue
        if rng.random() < density:
            terms[p] = rng.uniform(-1, 1)
    if not terms:
        terms[enumerate_paulis(n, 1)[1]] = 1.0
    return SparsePauliOp(n, terms)


def all_stab_products(n):
    """(6^n, n, 3) Bloch array of every stab_1 product state."""
    return np.array([STAB_BLOCH[list(c)] for c in itertools.product(range(6), repeat=n)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


#: one line per acceptance criterion, filled by test_acceptance and echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
