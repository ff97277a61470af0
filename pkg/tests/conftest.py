import socket

import pytest

from specsmith.fixtures import fixture_dir, load_fixture
from specsmith.gateway import Gateway, ReplayBackend, load_cassette_dir

GOLDEN = __import__("pathlib").Path(__file__).parent / "golden"


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """Any attempt to open a socket fails the test."""

    def refuse(*args, **kwargs):
        raise AssertionError("network access attempted during tests")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket.socket, "connect_ex", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)


@pytest.fixture(scope="session")
def fixtures_root():
    return fixture_dir()


@pytest.fixture(scope="session")
def cassette():
    return load_cassette_dir(fixture_dir() / "cassettes")


@pytest.fixture
def replay(cassette):
    return Gateway(ReplayBackend(cassette))


@pytest.fixture(scope="session")
def timer_doc():
    return load_fixture("las-timer").document()


@pytest.fixture(scope="session")
def bus_doc():
    return load_fixture("has-bus").document()


@pytest.fixture(scope="session")
def soc_doc():
    return load_fixture("mas-soc").document()


@pytest.fixture(scope="session")
def uart_doc():
    return load_fixture("las-uart").document()


# --- acceptance reporting -------------------------------------------------------------

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name, limit): acceptance criterion and its time limit in seconds")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    name, limit = mark.args
    _CRITERIA.append((name, limit, call.excinfo is None, call.duration))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, limit, ok, duration in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name:<32} {duration:6.2f}s (limit {limit}s)")
