from __future__ import annotations

"""Pytest configuration shared across all test modules.

We *explicitly* add the project root directory (one level up from the *tests*
package) to ``sys.path`` so that ``import housemove`` works even when the
working directory inside the test runner is not the project root.

Shared fixtures build small corridors and settings so every module's tests
run at desk-scale sizes.
"""

import sys
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from housemove.corridor import Corridor, Curve, TimeGrid  # noqa: E402
from housemove.kernels import KernelSettings  # noqa: E402


@pytest.fixture
def flat():
    """Flat house-moving corridor 0 -> 1 on [0, 1]."""
    return Corridor(Curve.constant(0.0), Curve.constant(1.0))


@pytest.fixture
def wavy():
    """Cosine upper curve, constant lower curve."""
    return Corridor(Curve.constant(0.0), Curve.cosine(0.1, 1.0, 0.0, 1.2))


@pytest.fixture
def grid64():
    return TimeGrid(0.0, 1.0, 64)


@pytest.fixture
def small_settings():
    return KernelSettings(n_steps=64, paths=400, nodes=16, replicates=2)
