"""
Caméras hors-axe pour écran fixe et œil suivi.

Trois représentations d'une même vue :
- matrices projection/vue façon OpenGL (``offaxis_stereo_transform``) ;
- caméra sténopé élargie + région d'image (``offaxis_stereo_camera``) ;
- paire d'yeux stéréo déduite de la tête (``stereo_eyes``).
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geom import (
    GeometryError,
    Mat4,
    Vec3,
    frustum_matrix,
    invert,
    is_unit,
    screen_basis,
    vec3,
)

logger = logging.getLogger(__name__)

# Valeurs par défaut des plans de découpe (sans effet sur les rayons)
DEFAULT_ZNEAR = 1e-3
DEFAULT_ZFAR = 1000.0

RECTANGULARITY_WARNING = 1e-4
RECTANGULARITY_ERROR = 1e-2
EDGE_TOLERANCE = 1e-9
IPD_ADVISORY_RANGE = (0.03, 0.09)


class NonRectangularScreenError(GeometryError):
    """Bords d'écran trop loin de la perpendicularité."""


class EyeBehindScreenError(GeometryError):
    """L'œil n'est pas strictement devant le plan de l'écran."""


class EyeOffScreenError(GeometryError):
    """La projection de l'œil tombe hors du rectangle de l'écran."""


class InvalidCameraError(GeometryError):
    """Paramètres de caméra ou de tête incohérents."""


@dataclass(frozen=True, eq=False)
class ScreenConfig:
    """Écran fixe défini par trois coins dans l'espace CAVE (mètres)."""

    lower_left: Vec3
    lower_right: Vec3
    upper_right: Vec3
    name: str = "screen"

    def __post_init__(self):
        for attr in ("lower_left", "lower_right", "upper_right"):
            object.__setattr__(self, attr, vec3(getattr(self, attr)))
        # Rejette les coins colinéaires dès la construction
        screen_basis(self.lower_left, self.lower_right, self.upper_right)

    @property
    def upper_left(self) -> Vec3:
        return self.lower_left + (self.upper_right - self.lower_right)

    @property
    def width(self) -> float:
        return float(np.linalg.norm(self.lower_right - self.lower_left))

    @property
    def height(self) -> float:
        return float(np.linalg.norm(self.upper_right - self.lower_right))

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def center(self) -> Vec3:
        return 0.5 * (self.lower_left + self.upper_right)

    @property
    def basis(self) -> tuple[Vec3, Vec3, Vec3]:
        return screen_basis(self.lower_left, self.lower_right, self.upper_right)

    def corners(self) -> tuple[Vec3, Vec3, Vec3, Vec3]:
        """Coins LL, LR, UR, UL."""
        return self.lower_left, self.lower_right, self.upper_right, self.upper_left

    def skew(self) -> float:
        """Cosinus de l'angle entre bord inférieur et bord droit."""
        ex = self.lower_right - self.lower_left
        ey = self.upper_right - self.lower_right
        return abs(float(np.dot(ex, ey))) / (self.width * self.height)


def _require_rectangular(screen: ScreenConfig) -> float:
    skew = screen.skew()
    if skew > RECTANGULARITY_ERROR:
        raise NonRectangularScreenError(
            f"Écran '{screen.name}' non rectangulaire (cos={skew:.2e} > {RECTANGULARITY_ERROR})"
        )
    return skew


def check_rectangular(screen: ScreenConfig) -> None:
    """Valide la rectangularité de l'écran.

    Au-delà de 1e-4 (bruit de calibration) un avertissement est journalisé,
    au-delà de 1e-2 l'écran est rejeté. À appeler une fois par écran, au
    chargement ; ``frustum_distances`` ne fait que le rejet, sans journal.
    """
    skew = _require_rectangular(screen)
    if skew > RECTANGULARITY_WARNING:
        logger.warning(
            "Écran '%s' légèrement non rectangulaire (cos=%.2e)", screen.name, skew
        )


@dataclass(frozen=True)
class Box2:
    """Sous-région normalisée de l'image, incluse dans [0,1]²."""

    min: tuple[float, float] = (0.0, 0.0)
    max: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        lo = tuple(float(c) for c in self.min)
        hi = tuple(float(c) for c in self.max)
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)
        if len(lo) != 2 or len(hi) != 2:
            raise GeometryError("Box2 attend des points 2D")
        for a, b in zip(lo, hi):
            if not (0.0 <= a <= b <= 1.0):
                raise GeometryError(f"Région d'image invalide: {lo} -> {hi}")

    @classmethod
    def unit(cls) -> "Box2":
        return cls((0.0, 0.0), (1.0, 1.0))

    @property
    def is_unit(self) -> bool:
        return self.min == (0.0, 0.0) and self.max == (1.0, 1.0)


@dataclass(frozen=True, eq=False)
class PinholeCamera:
    """Caméra sténopé symétrique restreinte à une région d'image."""

    eye: Vec3
    direction: Vec3
    up: Vec3
    fovy: float
    aspect: float
    image_region: Box2 = field(default_factory=Box2.unit)

    def __post_init__(self):
        for attr in ("eye", "direction", "up"):
            object.__setattr__(self, attr, vec3(getattr(self, attr)))
        if not (is_unit(self.direction) and is_unit(self.up)):
            raise InvalidCameraError("direction et up doivent être unitaires")
        if abs(float(np.dot(self.direction, self.up))) > 1e-6:
            raise InvalidCameraError("direction et up doivent être orthogonaux")
        if not (math.isfinite(self.fovy) and 0.0 < self.fovy < math.pi):
            raise InvalidCameraError(f"fovy hors de ]0, pi[: {self.fovy}")
        if not (math.isfinite(self.aspect) and self.aspect > 0.0):
            raise InvalidCameraError(f"aspect doit être > 0: {self.aspect}")

    @property
    def right(self) -> Vec3:
        return np.cross(self.direction, self.up)


@dataclass(frozen=True, eq=False)
class StereoRig:
    """Position de la tête, axe droit de la tête et distance interpupillaire."""

    head_position: Vec3
    head_right: Vec3
    ipd: float

    def __post_init__(self):
        object.__setattr__(self, "head_position", vec3(self.head_position))
        object.__setattr__(self, "head_right", vec3(self.head_right))
        if not is_unit(self.head_right):
            raise InvalidCameraError(f"head_right doit être unitaire: {self.head_right}")
        if not math.isfinite(self.ipd) or self.ipd < 0.0:
            raise InvalidCameraError(f"ipd doit être >= 0: {self.ipd}")
        lo, hi = IPD_ADVISORY_RANGE
        if not lo <= self.ipd <= hi:
            logger.warning("IPD inhabituelle: %.4f m (plage usuelle %.2f-%.2f)", self.ipd, lo, hi)


@dataclass(frozen=True)
class FrustumDistances:
    """Distance œil/écran et distances de la projection de l'œil aux bords."""

    dist: float
    left: float
    right: float
    bottom: float
    top: float


@dataclass(frozen=True, eq=False)
class CameraMatrices:
    """Matrices projection/vue et leurs inverses."""

    proj: Mat4
    view: Mat4
    proj_inv: Mat4
    view_inv: Mat4

    def __post_init__(self):
        identity = np.eye(4)
        if not np.allclose(self.proj @ self.proj_inv, identity, atol=1e-6):
            raise InvalidCameraError("proj_inv n'est pas l'inverse de proj")
        if not np.allclose(self.view @ self.view_inv, identity, atol=1e-6):
            raise InvalidCameraError("view_inv n'est pas l'inverse de view")

    @classmethod
    def from_matrices(cls, proj: Mat4, view: Mat4) -> "CameraMatrices":
        proj = np.asarray(proj, dtype=np.float64)
        view = np.asarray(view, dtype=np.float64)
        return cls(proj, view, invert(proj), invert(view))

    @property
    def is_perspective(self) -> bool:
        return abs(self.proj[3, 2] + 1.0) < 1e-9 and abs(self.proj[3, 3]) < 1e-9

    @property
    def eye(self) -> Vec3:
        """Origine de l'espace œil exprimée dans l'espace CAVE."""
        return self.view_inv[:3, 3] / self.view_inv[3, 3]

    @property
    def forward(self) -> Vec3:
        """Direction de visée (-z de l'espace œil) dans l'espace CAVE."""
        return -self.view_inv[:3, 2] / np.linalg.norm(self.view_inv[:3, 2])


# =============================================================================
# Opérations
# =============================================================================


def frustum_distances(screen: ScreenConfig, eye: Vec3) -> FrustumDistances:
    """Distances de l'œil au plan et aux quatre bords de l'écran.

    Raises:
        NonRectangularScreenError: Écran trop cisaillé.
        EyeBehindScreenError: Œil sur ou derrière le plan de l'écran.
        EyeOffScreenError: Projection de l'œil hors du rectangle.
    """
    _require_rectangular(screen)
    x, y, z = screen.basis
    eye_p = vec3(eye) - screen.lower_left

    dist = float(np.dot(eye_p, z))
    if dist <= 1e-9:
        raise EyeBehindScreenError(
            f"Œil derrière l'écran '{screen.name}' (distance={dist:.4g} m)"
        )

    width, height = screen.width, screen.height
    left = float(np.dot(eye_p, x))
    bottom = float(np.dot(eye_p, y))
    distances = FrustumDistances(
        dist=dist, left=left, right=width - left, bottom=bottom, top=height - bottom
    )

    for edge, extent in (("left", width), ("right", width), ("bottom", height), ("top", height)):
        value = getattr(distances, edge)
        if value < -EDGE_TOLERANCE * extent:
            raise EyeOffScreenError(
                f"Œil hors de l'écran '{screen.name}': distance {edge}={value:.4g} m"
            )
    return distances


def view_matrix(x: Vec3, y: Vec3, z: Vec3, eye: Vec3) -> Mat4:
    """Matrice monde vers œil : p -> (X·(p-eye), Y·(p-eye), Z·(p-eye))."""
    view = np.eye(4)
    rotation = np.stack([x, y, z])
    view[:3, :3] = rotation
    view[:3, 3] = -rotation @ vec3(eye)
    return view


def offaxis_stereo_transform(
    screen: ScreenConfig,
    eye: Vec3,
    znear: float = DEFAULT_ZNEAR,
    zfar: float = DEFAULT_ZFAR,
) -> CameraMatrices:
    """Matrices projection/vue hors-axe pour un écran fixe et un œil.

    Les coins LL, LR, UR, UL de l'écran se projettent en NDC (x, y) =
    (-1,-1), (1,-1), (1,1), (-1,1) pour toute position d'œil valide.
    """
    d = frustum_distances(screen, eye)
    scale = znear / d.dist
    proj = frustum_matrix(
        -d.left * scale, d.right * scale, -d.bottom * scale, d.top * scale, znear, zfar
    )
    view = view_matrix(*screen.basis, eye)
    return CameraMatrices.from_matrices(proj, view)


def offaxis_stereo_camera(screen: ScreenConfig, eye: Vec3) -> PinholeCamera:
    """Caméra sténopé symétrique élargie + région d'image équivalente.

    Le plan virtuel est élargi à deux fois la plus grande distance de bord
    dans chaque dimension, puis la région d'image ne conserve que la partie
    correspondant à l'écran réel.
    """
    d = frustum_distances(screen, eye)
    x, y, z = screen.basis
    left, right, bottom, top = d.left, d.right, d.bottom, d.top

    new_width = 2 * right if left < right else 2 * left
    new_height = 2 * top if bottom < top else 2 * bottom

    fovy = 2.0 * math.atan(new_height / (2.0 * d.dist))
    aspect = new_width / new_height

    lo_x = (right - left) / new_width if left < right else 0.0
    hi_x = (left + right) / new_width if right < left else 1.0
    lo_y = (top - bottom) / new_height if bottom < top else 0.0
    hi_y = (bottom + top) / new_height if top < bottom else 1.0

    region = Box2(
        (_clamp01(lo_x), _clamp01(lo_y)),
        (_clamp01(hi_x), _clamp01(hi_y)),
    )
    return PinholeCamera(
        eye=vec3(eye), direction=-z, up=y, fovy=fovy, aspect=aspect, image_region=region
    )


def _clamp01(value: float) -> float:
    # Les bords tolérés à EDGE_TOLERANCE près peuvent déborder de 1 ulp
    return min(max(value, 0.0), 1.0)


def stereo_eyes(rig: StereoRig) -> tuple[Vec3, Vec3]:
    """Positions (œil gauche, œil droit) de part et d'autre de la tête."""
    offset = 0.5 * rig.ipd * rig.head_right
    return rig.head_position - offset, rig.head_position + offset
