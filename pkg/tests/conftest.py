import sys
from pathlib import Path

import numpy as np
import pytest

import memchan.cli
import memchan.device

sys.path.insert(0, str(Path(__file__).parent))

# Every transcript produced anywhere in the suite is kept here so the
# entropy-chain acceptance check can audit all of them at the end.
RECORDED_TRANSCRIPTS = []

_run_sequence = memchan.device.run_sequence


def _recording_run_sequence(*args, **kwargs):
    t = _run_sequence(*args, **kwargs)
    RECORDED_TRANSCRIPTS.append(t)
    return t


memchan.device.run_sequence = _recording_run_sequence
memchan.cli.run_sequence = _recording_run_sequence

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")
    config.addinivalue_line("markers", "audit_last: run after every other test")


def pytest_collection_modifyitems(config, items):
    items.sort(key=lambda item: item.get_closest_marker("audit_last") is not None)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    info = _CRITERIA.get(report.nodeid)
    if info is None:
        return
    number, title, ok = info
    passed = report.outcome == "passed"
    _CRITERIA[report.nodeid] = (number, title, passed if ok is None else ok and passed)


def pytest_collection_finish(session):
    for item in session.items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            number, title = marker.args
            _CRITERIA[item.nodeid] = (number, title, None)


def pytest_terminal_summary(terminalreporter):
    by_number = {}
    for number, title, ok in _CRITERIA.values():
        if ok is None:
            continue
        prev = by_number.get(number, (title, True))
        by_number[number] = (title, prev[1] and ok)
    if not by_number:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(by_number):
        title, ok = by_number[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
