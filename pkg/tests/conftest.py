import math

import pytest

from dimercorr.model import wavelength_from_energy

LAM_3EV = wavelength_from_energy(3.0)
SPHERE_R = 200.0 / LAM_3EV
SPHERE_B = 300.0 / LAM_3EV
SPHERE_EPS = (2.13, -5 + 0.1j, -3 + 0.01j)
PLANAR_EPS = (2.13, -5 + 0.1j, -3 + 0.01j)

_criteria = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda s: int(s.split("_")[2])):
        terminalreporter.write_line(f"{_criteria[name]}  {name}")


@pytest.fixture(scope="session")
def sphere_geometry():
    return SPHERE_R, SPHERE_B
