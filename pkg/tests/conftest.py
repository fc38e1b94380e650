import pytest

_results: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    label = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = item.user_properties and dict(item.user_properties).get("detail", "") or ""
        _results[label] = ("PASS" if rep.outcome == "passed" else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_results, key=lambda s: (int(s.split()[0].rstrip("abc")), s)):
        status, detail = _results[label]
        terminalreporter.write_line(f"{status}  criterion {label}" + (f"  [{detail}]" if detail else ""))
