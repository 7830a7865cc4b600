import numpy as np
import pytest

from thaotdr.spectral import Kind, Spectrum, Unit, WavelengthGrid


@pytest.fixture
def grid_25():
    return WavelengthGrid.arange(1100.0, 1800.0, 25.0)


def db_spectrum(wls, values, kind=Kind.REFLECTANCE):
    return Spectrum(WavelengthGrid(np.asarray(wls, dtype=float)), np.asarray(values, dtype=float),
                    Unit.DB, kind)


# ----------------------------------------------------------------------------
# acceptance summary: one line per criterion, whatever the verbosity

_ACCEPTANCE: dict[int, list] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    num = int(name.split("_")[2])
    _ACCEPTANCE.setdefault(num, []).append((name, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[num]
        ok = all(p for _, p in parts)
        failed = [n for n, p in parts if not p]
        detail = "" if ok else "  (failing: " + ", ".join(failed) + ")"
        tr.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}{detail}")
