import re

import pytest

_CRITERIA = {}


@pytest.fixture
def pcap_path(tmp_path):
    return tmp_path / "cap.pcap"


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_c(\d+)_", report.nodeid)
    if not m:
        return
    if report.when == "call" or report.outcome != "passed":
        ok = _CRITERIA.get(m.group(1), (True, ""))[0] and report.outcome == "passed"
        _CRITERIA[m.group(1)] = (ok, report.nodeid.split("::")[1].split("[")[0])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=int):
        ok, name = _CRITERIA[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  ({name})")
