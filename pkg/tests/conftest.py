from functools import lru_cache

import pytest

from rmtedge.orthopoly import build_recurrence
from rmtedge.potential import builtin, equilibrium
from rmtedge.skewkernel import PsiBank, build_moments

ACCEPTANCE = {}


@lru_cache(maxsize=None)
def table(name, n, L=None):
    return build_recurrence(builtin(name, L=L), n)


@lru_cache(maxsize=None)
def context(name, n):
    """(table, psi bank, skew moments, gamma) shared across test modules."""
    T = table(name, n)
    bank = PsiBank(T)
    return T, bank, build_moments(T, bank), equilibrium(T.potential).gamma


@pytest.fixture(scope="session")
def gauss64():
    return context("gaussian", 64)


@pytest.fixture(scope="session")
def quartic64():
    return context("quartic12", 64)


@pytest.fixture(scope="session")
def record():
    """Acceptance tests call record(k, passed, detail); lines print in the terminal summary."""
    def _record(k, passed, detail):
        ACCEPTANCE[k] = (passed, detail)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {k}: {detail}")
