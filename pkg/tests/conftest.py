from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from util import run_mini  # noqa: E402


@pytest.fixture(scope="session")
def mini_batch(tmp_path_factory):
    """One small written-to-disk batch shared by metrics/harness/golden tests."""
    out = tmp_path_factory.mktemp("mini_batch")
    return run_mini(out)
