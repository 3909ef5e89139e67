"""
Shared pytest setup: project root on sys.path, the `slow` marker and small grids.
"""
import sys
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from tunneling.grid import make_grid  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: expensive numerical oracles (deselect with -m 'not slow')")


@pytest.fixture
def small_grid():
    """Coarse grid that still resolves a soft-core ground state"""
    return make_grid(40.0, 512)


@pytest.fixture
def tmp_out(tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    return out
