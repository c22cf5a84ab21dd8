from __future__ import annotations

import pytest

from csslab.grid import build_grid


@pytest.fixture(scope="session")
def grid_medium():
    return build_grid(40.0, 4096)


@pytest.fixture(scope="session")
def grid_fine():
    return build_grid(40.0, 16384)
