import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

CRITERIA = {
    1: "harmonic example exactness",
    2: "degeneracy reproduction",
    3: "spectral oracle equivalence",
    4: "brute-force policy optimality",
    5: "bound suite",
    6: "truncation invariants",
    7: "shift equivariance",
    8: "simulation consistency",
    9: "assumption checkers",
}

_results = {}


@pytest.fixture
def record():
    """Store one verdict per acceptance criterion for the terminal summary."""
    def _record(number, passed, detail):
        _results[number] = (bool(passed), detail)
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number, name in CRITERIA.items():
        if number in _results:
            passed, detail = _results[number]
            verdict = "PASS" if passed else "FAIL"
        else:
            verdict, detail = "FAIL", "not run or errored before a verdict"
        terminalreporter.write_line(f"[{verdict}] {number}. {name}: {detail}")
