import os

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

TIER = os.environ.get("BRANCHFLUCT_TIER", "smoke")


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("BRANCHFLUCT_OUTPUT_ROOT", str(tmp_path / "runs"))
    return tmp_path / "runs"


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def report(request, capsys):
    """``report(number, title, passed, detail)``: one pass/fail line per acceptance criterion."""
    def _report(number, title, passed, detail=""):
        line = f"criterion {number:>2} [{TIER}] {title}: {'PASS' if passed else 'FAIL'}" + (f"  ({detail})" if detail else "")
        request.config.stash[_ACCEPTANCE].append((number, line))
        with capsys.disabled():
            print("\n" + line)
        return passed
    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
