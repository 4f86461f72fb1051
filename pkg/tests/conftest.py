from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from phenordf.pipeline import build_from_file, bundled_diabetes, bundled_path  # noqa: E402

DIABETES_DIR = bundled_path("diabetes")

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker.args
    if report.failed:
        _criteria[number] = ("FAIL", title)
    elif report.when == "call":
        _criteria.setdefault(number, ("PASS", title))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, title = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")


@pytest.fixture(scope="session")
def diabetes():
    return build_from_file(bundled_diabetes())


@pytest.fixture
def fixture_text():
    def read(name: str) -> str:
        return (DIABETES_DIR / name).read_text(encoding="utf-8")

    return read
