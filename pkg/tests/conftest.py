import sys
from fractions import Fraction

import pytest

from solspec.core import ThetaSequence
from solspec.lengths import LengthSpec


@pytest.fixture(scope="session")
def theta():
    """theta = (2/3, 1/3, 2/3, ...) for p = 2."""
    return ThetaSequence(Fraction(2, 3), (), (0, 1), 2)


@pytest.fixture(scope="session")
def trivial_theta():
    return ThetaSequence(Fraction(0), (), (0,), 2)


@pytest.fixture(scope="session")
def sum2():
    return LengthSpec.sum(2)


def pytest_terminal_summary(terminalreporter):
    # one line per acceptance criterion, in criterion order
    for mod in list(sys.modules.values()):
        results = getattr(mod, "ACCEPTANCE_RESULTS", None)
        if isinstance(results, dict) and results:
            terminalreporter.section("acceptance criteria")
            for key in sorted(results, key=lambda k: (int(k.rstrip("ab")), k)):
                ok, label, detail = results[key]
                terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key:>3} {label}: {detail}")
            break
