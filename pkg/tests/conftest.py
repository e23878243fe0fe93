import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from svnet.market_data import Dataset  # noqa: E402


def make_dataset(rows, calendar_length=10, **kw):
    """Dataset from ``(investor, day, bought, sold)`` rows."""
    return Dataset.from_records(rows, calendar_length, **kw)


@pytest.fixture
def dataset_factory():
    return make_dataset


_acceptance = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        _acceptance.append((marker.args[0], rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, ok, detail in _acceptance:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else ""))
