import pytest

from pagedb.config import Config
from pagedb.engine import Engine
from pagedb.server import start_server

FAST = dict(poll_interval=0.01, wait_timeout=0.1)


@pytest.fixture
def make_engine(tmp_path):
    made = []

    def factory(subdir="db", **kw):
        opts = {**FAST, **kw}
        engine = Engine(Config(data_dir=str(tmp_path / subdir), **opts))
        made.append(engine)
        return engine

    yield factory


@pytest.fixture
def engine(make_engine):
    return make_engine()


@pytest.fixture
def make_server(make_engine):
    servers = []

    def factory(**kw):
        server = start_server(make_engine(**kw))
        servers.append(server)
        return server

    yield factory
    for server in servers:
        server.stop()


# --- acceptance summary: one line per criterion --------------------------

_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in _acceptance.items():
        name = nodeid.split("::")[-1]
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {name}")
