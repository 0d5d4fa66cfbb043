import os
import sys
import warnings

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from wstarhom.ap_core import TrigPolynomial  # noqa: E402
from wstarhom.errors import TruncationWarning  # noqa: E402
from wstarhom.fields import Phase, QuasiPeriodicEnsemble  # noqa: E402
from wstarhom.operators import EllipticOperator  # noqa: E402

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# acceptance criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(autouse=True)
def _quiet_truncation():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        yield


@pytest.fixture
def sin_ensemble():
    """1-torus ensemble with channel a(theta) = 2 + sin(theta)."""
    return QuasiPeriodicEnsemble([1.0], TrigPolynomial(1, [((1,), 0.0, 1.0)], 2.0))


@pytest.fixture
def sin_operator(sin_ensemble):
    return EllipticOperator.linear("a", 1, 3, ensemble=sin_ensemble)


@pytest.fixture
def phase0():
    return Phase([0.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
