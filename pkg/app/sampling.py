"""
Tirages aléatoires de configurations écran/œil.

Utilisé par les tests de propriétés et par ``scripts/acceptance.py`` :
écrans de 0.5 à 10 m d'orientation quelconque, yeux à 0.2-5 m du plan et
à au moins 5% de chaque bord.
"""

import numpy as np

from .geom import Vec3
from .offaxis import ScreenConfig


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Rotation aléatoire (axe uniforme sur la sphère, angle uniforme)."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-np.pi, np.pi)
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def random_screen(
    rng: np.random.Generator,
    size_range: tuple[float, float] = (0.5, 10.0),
    offset_range: float = 5.0,
) -> ScreenConfig:
    rotation = random_rotation(rng)
    width, height = rng.uniform(*size_range, size=2)
    ll = rng.uniform(-offset_range, offset_range, size=3)
    lr = ll + width * rotation[:, 0]
    ur = lr + height * rotation[:, 1]
    return ScreenConfig(ll, lr, ur, name="random")


def random_eye(
    screen: ScreenConfig,
    rng: np.random.Generator,
    margin: float = 0.05,
    dist_range: tuple[float, float] = (0.2, 5.0),
) -> Vec3:
    x, y, z = screen.basis
    left = rng.uniform(margin, 1.0 - margin) * screen.width
    bottom = rng.uniform(margin, 1.0 - margin) * screen.height
    dist = rng.uniform(*dist_range)
    return screen.lower_left + left * x + bottom * y + dist * z


def random_configuration(rng: np.random.Generator) -> tuple[ScreenConfig, Vec3]:
    screen = random_screen(rng)
    return screen, random_eye(screen, rng)
