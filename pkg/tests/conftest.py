import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from emojipred.emoji_unicode import default_table  # noqa: E402

_acceptance: list[tuple[str, str, str]] = []


@pytest.fixture(scope="session")
def table():
    return default_table()


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = report.user_properties and dict(report.user_properties).get("acceptance")
    if marker:
        _acceptance.append((marker[0], marker[1], report.outcome.upper()))


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    m = item.get_closest_marker("acceptance")
    if m:
        item.user_properties.append(("acceptance", m.args))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome in sorted(_acceptance, key=lambda r: int(r[0])):
        terminalreporter.write_line(f"AC-{number:>2} {outcome:<6} {title}")
