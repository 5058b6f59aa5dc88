import numpy as np
import pytest

from app.config import settings


@pytest.fixture
def rng():
    return np.random.default_rng(settings.random_seed)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """Point bare output file names at a per-test directory."""
    monkeypatch.setattr(settings, "output_path", str(tmp_path))
    return tmp_path
