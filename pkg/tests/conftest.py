from importlib import resources

import pytest

from annulus_action.action import ActionField
from annulus_action.mapdef import parse_map_line
from annulus_action.specfile import load_spec

CRITERIA = range(1, 14)
_RESULTS = pytest.StashKey[dict]()


def fixture_text(name):
    return resources.files("annulus_action").joinpath("fixtures", name).read_text()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion checked by a test")
    config.stash[_RESULTS] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and rep.passed):
        return
    results = item.config.stash[_RESULTS]
    n = marker.args[0]
    results[n] = results.get(n, True) and rep.passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash[_RESULTS]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in CRITERIA:
        if n in results:
            terminalreporter.write_line(f"criterion {n}: {'PASS' if results[n] else 'FAIL'}")
        else:
            terminalreporter.write_line(f"criterion {n}: NOT RUN")


@pytest.fixture(scope="session")
def twist():
    return parse_map_line("twist(1, 0)")


@pytest.fixture(scope="session")
def twist_field(twist):
    return ActionField(twist)


@pytest.fixture(scope="session")
def ex25_spec():
    return load_spec(fixture_text("example_2_5.spec"))


@pytest.fixture(scope="session")
def ex25(ex25_spec):
    return ex25_spec.map


@pytest.fixture(scope="session")
def ex25_field(ex25):
    return ActionField(ex25)
