import time

import pytest

from expgrowth.runner import run_preset

_VERDICTS = pytest.StashKey()


def pytest_configure(config):
    config.stash[_VERDICTS] = {}


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])


@pytest.fixture
def verdict(request):
    """``verdict(n, ok, detail)`` prints and records one line, then asserts ``ok``."""

    def record(n, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}"
        print(line)
        request.config.stash[_VERDICTS][n] = line
        assert ok, line

    return record


class PresetRun:
    def __init__(self, name, out_dir):
        t = time.perf_counter()
        self.result = run_preset(name, str(out_dir))
        self.seconds = time.perf_counter() - t
        self.log = self.result.log
        self.report = self.result.report


@pytest.fixture(scope="session")
def fig1_run(tmp_path_factory):
    return PresetRun("fig1", tmp_path_factory.mktemp("fig1"))


@pytest.fixture(scope="session")
def fig2_run(tmp_path_factory):
    return PresetRun("fig2", tmp_path_factory.mktemp("fig2"))


@pytest.fixture(scope="session")
def fig3_run(tmp_path_factory):
    return PresetRun("fig3", tmp_path_factory.mktemp("fig3"))
