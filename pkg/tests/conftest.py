from __future__ import annotations

import pytest

from modelport.registry import RegistryService

# criterion name -> outcome, filled by the hook below for test_acceptance.py
_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance_results[name] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, outcome in _acceptance_results.items():
        verdict = {"passed": "PASS", "skipped": "SKIP"}.get(outcome, "FAIL")
        terminalreporter.write_line(f"{verdict}  {name}")


@pytest.fixture
def registry(tmp_path):
    service = RegistryService(tmp_path / "registry-data").start()
    yield service
    service.stop()


@pytest.fixture
def instances():
    """Tracks spawned instances and always stops them."""
    running = []
    yield running
    for inst in running:
        try:
            inst.stop()
        except Exception:
            pass
