"""Fixtures partagées."""

import numpy as np
import pytest

from app.offaxis import ScreenConfig


@pytest.fixture
def unit_screen() -> ScreenConfig:
    """Écran [-1, 1]² dans le plan z = 0, face à +z."""
    return ScreenConfig((-1.0, -1.0, 0.0), (1.0, -1.0, 0.0), (1.0, 1.0, 0.0), name="front")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


MINIMAL_CONFIG = """\
screen:
  lower_left: [-1, -1, 0]
  lower_right: [1, -1, 0]
  upper_right: [1, 1, 0]
head:
  position: [0, 0, 1.5]
"""


@pytest.fixture
def minimal_config_text() -> str:
    return MINIMAL_CONFIG


@pytest.fixture
def config_file(tmp_path):
    """Écrit un YAML de test et renvoie son chemin."""

    def write(text: str = MINIMAL_CONFIG, name: str = "run.yaml"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write
