from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from grassflow.instance import load_instance

DATA = Path(__file__).resolve().parents[1] / "src" / "grassflow" / "data"

settings.register_profile("grassflow", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("grassflow")


@pytest.fixture
def shipped():
    def load(name):
        return load_instance(DATA / f"{name}.json")
    return load


@pytest.fixture
def data_dir():
    return DATA


# -- one summary line per acceptance criterion

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    detail = dict(item.user_properties).get("detail", "")
    _CRITERIA.append((mark.args[0], mark.args[1], "PASS" if rep.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, title, verdict, detail in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {number} {verdict}: {title}" + (f" ({detail})" if detail else ""))
