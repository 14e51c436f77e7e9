import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_verdicts = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): numbered acceptance check")
    config.stash[_verdicts] = {}


def _entry(config, marker):
    number, title = marker.args
    return config.stash[_verdicts].setdefault(
        number, {"title": title, "ok": True, "ran": 0, "notes": {}})


@pytest.fixture
def notes(request):
    """Detail lines for the criterion of the requesting test, printed once each."""
    marker = request.node.get_closest_marker("criterion")
    book = _entry(request.config, marker)["notes"]

    class Notes:
        def append(self, text):
            book.setdefault(text, None)

    return Notes()


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None and (report.when == "call" or report.failed):
        entry = _entry(item.config, marker)
        entry["ran"] += report.when == "call"
        if report.failed:
            entry["ok"] = False
            entry["notes"].setdefault(f"{item.name} failed", None)
    return report


def pytest_terminal_summary(terminalreporter, config):
    book = config.stash[_verdicts]
    if not book:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(book):
        entry = book[number]
        verdict = "PASS" if entry["ok"] and entry["ran"] else "FAIL"
        detail = "; ".join(entry["notes"])
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {entry['title']}  {detail}")
