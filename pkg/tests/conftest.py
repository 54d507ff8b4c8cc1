import shutil
from importlib import resources
from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def fixture_src() -> Path:
    return Path(str(resources.files("deiatransit").joinpath("data/fixture")))


@pytest.fixture
def fixture_dir(tmp_path, fixture_src) -> Path:
    """Private copy of the bundled fixture; its config writes to ``<copy>/out``."""
    dst = tmp_path / "fixture"
    shutil.copytree(fixture_src, dst)
    return dst


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line and assert it passed."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
