import os

import pytest
from hypothesis import HealthCheck, settings

# Property suites run at least 1000 randomized cases each.
settings.register_profile(
    "thorough", max_examples=1000, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("quick", max_examples=50, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "thorough"))

PROPERTY_MODULE = "test_properties.py"

# outcomes of the property module and of each acceptance criterion in this session
property_outcomes: dict[str, str] = {}
criterion_lines: dict[int, tuple[str, str, list]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


def pytest_collection_modifyitems(config, items):
    # acceptance last, so it can reuse the property outcomes of this session
    items.sort(key=lambda it: it.path.name == "test_acceptance.py")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.path.name == PROPERTY_MODULE and (rep.when == "call" or rep.failed):
        property_outcomes[item.name] = rep.outcome
    mark = item.get_closest_marker("criterion")
    if mark and (rep.when == "call" or rep.failed):
        n, title = mark.args
        notes = item.funcargs.get("notes", []) if hasattr(item, "funcargs") else []
        status = "PASS" if rep.passed else "FAIL"
        if rep.when == "call" or n not in criterion_lines:
            criterion_lines[n] = (status, title, notes)


def pytest_terminal_summary(terminalreporter):
    if not criterion_lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(criterion_lines):
        status, title, notes = criterion_lines[n]
        detail = "; ".join(notes)
        terminalreporter.write_line(f"{status} criterion {n}: {title}" + (f" ({detail})" if detail else ""))


@pytest.fixture
def notes():
    """List the acceptance tests append measured values to."""
    return []
