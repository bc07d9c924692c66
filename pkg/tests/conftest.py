import shutil
import time
from pathlib import Path

import pytest

from hpbvapor import atom_data

ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = ROOT / "configs"

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}
_START = time.perf_counter()


def record(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    total = time.perf_counter() - _START
    verdict = "PASS" if total < 120 else "FAIL"
    terminalreporter.write_line(f"suite runtime: {verdict}  {total:.1f} s (< 120 s)")


@pytest.fixture(autouse=True)
def _fresh_catalog(monkeypatch):
    monkeypatch.delenv(atom_data.ENV_OVERRIDE, raising=False)
    atom_data.reset_catalog()
    yield
    atom_data.reset_catalog()


@pytest.fixture
def config_copy(tmp_path):
    """Shipped configs and their data copied into a scratch directory."""
    dest = tmp_path / "configs"
    shutil.copytree(CONFIG_DIR, dest, ignore=shutil.ignore_patterns("out"))
    return dest
