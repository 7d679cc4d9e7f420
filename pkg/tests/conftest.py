import sys
from functools import lru_cache
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from pathcert import examples  # noqa: E402
from pathcert.sos import solve_disconnect  # noqa: E402

FIXTURES = Path(__file__).resolve().parent / "fixtures"


@lru_cache(maxsize=None)
def cached_disconnect(name: str, order: int, builder: str | None = None):
    return solve_disconnect(examples.load(name), order, builder)


@pytest.fixture(scope="session")
def gap_result():
    """Barrier solve of the two-interval instance at order 3 (degree-6 v)."""
    return cached_disconnect("univariate_gap", 3)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
