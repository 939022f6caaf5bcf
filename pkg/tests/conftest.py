import warnings

import pytest

# criterion number -> list of (label, passed, detail)
ACCEPTANCE = {}


@pytest.fixture
def record():
    def _record(criterion, label, passed, detail=""):
        ACCEPTANCE.setdefault(criterion, []).append((label, bool(passed), detail))
        return passed

    return _record


@pytest.fixture(autouse=True)
def _quiet_numba():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*TBB.*")
        yield


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[crit]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{lab}: {'ok' if p else 'FAILED'} ({d})" for lab, p, d in parts)
        tr.write_line(f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'} | {detail}")
