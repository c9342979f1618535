import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
sys.path.insert(0, str(Path(__file__).parent))

from edgesleep.config import load_config  # noqa: E402


@pytest.fixture
def tiny_cfg():
    return load_config(CONFIGS / "tiny.toml")


@pytest.fixture
def scenario_cfg():
    return load_config(CONFIGS / "scenario.toml")
