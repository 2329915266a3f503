"""
Génération des rayons primaires dans l'espace CAVE.

Trois stratégies produisent les mêmes rayons géométriques :
1. inverse des matrices projection/vue (rayons orthogonaux en NDC) ;
2. caméra sténopé élargie + région d'image ;
3. caméra sténopé reconstruite à partir des seules matrices.

Les pixels sont échantillonnés en leur centre (+0.5), la ligne 0 est la
ligne du bas, l'ordre de sortie est ligne par ligne.
"""

import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .geom import (
    GeometryError,
    ParallelPlanesError,
    Plane,
    Vec3,
    closest_segment_between_lines,
    intersect_plane_plane,
    normalize,
    unproject_ndc,
    vec3,
)
from .offaxis import (
    DEFAULT_ZFAR,
    DEFAULT_ZNEAR,
    Box2,
    CameraMatrices,
    PinholeCamera,
    ScreenConfig,
    offaxis_stereo_camera,
    offaxis_stereo_transform,
)

logger = logging.getLogger(__name__)

SKEW_TOLERANCE = 1e-3


class ExcessiveSkewError(GeometryError):
    """Les arêtes du frustum ne convergent pas vers un œil unique."""


class PixelOutOfRangeError(GeometryError):
    """Indice de pixel hors de la grille."""


class Strategy(IntEnum):
    MATRICES = 1
    PINHOLE = 2
    RECONSTRUCTED = 3


@dataclass(frozen=True, eq=False)
class Ray:
    """Rayon paramétré ``origin + t * direction`` pour t dans [tmin, tmax]."""

    origin: Vec3
    direction: Vec3
    tmin: float = 0.0
    tmax: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "origin", vec3(self.origin))
        object.__setattr__(self, "direction", vec3(self.direction))
        if abs(float(np.linalg.norm(self.direction)) - 1.0) > 1e-6:
            raise GeometryError(f"Direction de rayon non unitaire: {self.direction}")
        if not 0.0 <= self.tmin <= self.tmax:
            raise GeometryError(f"Intervalle de rayon invalide: [{self.tmin}, {self.tmax}]")

    def at(self, t: float) -> Vec3:
        return self.origin + t * self.direction


@dataclass(frozen=True)
class PixelGrid:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise GeometryError(f"Grille invalide: {self.width}x{self.height}")

    @property
    def size(self) -> int:
        return self.width * self.height

    def pixel_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Indices (x, y) de tous les pixels en ordre ligne par ligne."""
        ys, xs = np.divmod(np.arange(self.size), self.width)
        return xs.astype(np.float64), ys.astype(np.float64)

    def check(self, x: int, y: int) -> None:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise PixelOutOfRangeError(
                f"Pixel ({x}, {y}) hors de la grille {self.width}x{self.height}"
            )


class RayBatch(Sequence):
    """Lot de rayons vectorisé, vu comme une séquence de ``Ray``."""

    def __init__(
        self,
        origins: np.ndarray,
        directions: np.ndarray,
        grid: PixelGrid,
        tmin: np.ndarray | None = None,
        tmax: np.ndarray | None = None,
    ):
        self.origins = origins
        self.directions = directions
        self.grid = grid
        n = len(origins)
        self.tmin = np.zeros(n) if tmin is None else tmin
        self.tmax = np.full(n, math.inf) if tmax is None else tmax

    def __len__(self) -> int:
        return len(self.origins)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        return Ray(
            self.origins[index],
            self.directions[index],
            float(self.tmin[index]),
            float(self.tmax[index]),
        )

    def __iter__(self) -> Iterator[Ray]:
        for i in range(len(self)):
            yield self[i]

    def at_pixel(self, x: int, y: int) -> Ray:
        self.grid.check(x, y)
        return self[y * self.grid.width + x]


def _normalize_rows(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


# =============================================================================
# Stratégie 1 : matrices inverses
# =============================================================================


def _matrix_rays(
    cams: CameraMatrices, grid: PixelGrid, xs: np.ndarray, ys: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    u = 2.0 * (xs + 0.5) / grid.width - 1.0
    v = 2.0 * (ys + 0.5) / grid.height - 1.0
    near = unproject_ndc(cams.proj_inv, cams.view_inv, np.stack([u, v, -np.ones_like(u)], axis=-1))
    far = unproject_ndc(cams.proj_inv, cams.view_inv, np.stack([u, v, np.ones_like(u)], axis=-1))
    return near, _normalize_rows(far - near)


def ray_from_matrices(x: int, y: int, cams: CameraMatrices, grid: PixelGrid) -> Ray:
    """Rayon du pixel (x, y) par déprojection des NDC z=-1 et z=+1.

    L'origine est sur le plan near, pas à l'œil.
    """
    grid.check(x, y)
    origins, directions = _matrix_rays(cams, grid, np.array([float(x)]), np.array([float(y)]))
    return Ray(origins[0], directions[0])


# =============================================================================
# Stratégie 2 : sténopé + région d'image
# =============================================================================


def remap_image_region(u, v, region: Box2):
    """Interpolation linéaire de (u, v) dans la région d'image.

    ``(u', v') = (1 - (u, v)) ⊙ min + (u, v) ⊙ max``. Accepte des scalaires
    ou des tableaux numpy.
    """
    (lo_x, lo_y), (hi_x, hi_y) = region.min, region.max
    return (1.0 - u) * lo_x + u * hi_x, (1.0 - v) * lo_y + v * hi_y


def _pinhole_rays(
    cam: PinholeCamera, grid: PixelGrid, xs: np.ndarray, ys: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    u, v = remap_image_region((xs + 0.5) / grid.width, (ys + 0.5) / grid.height, cam.image_region)
    half_height = math.tan(0.5 * cam.fovy)
    sx = (2.0 * u - 1.0) * cam.aspect * half_height
    sy = (2.0 * v - 1.0) * half_height
    directions = cam.direction + sx[:, None] * cam.right + sy[:, None] * cam.up
    origins = np.broadcast_to(cam.eye, directions.shape).copy()
    return origins, _normalize_rows(directions)


def ray_from_pinhole(x: int, y: int, cam: PinholeCamera, grid: PixelGrid) -> Ray:
    """Rayon du pixel (x, y) pour une caméra sténopé avec région d'image."""
    grid.check(x, y)
    origins, directions = _pinhole_rays(cam, grid, np.array([float(x)]), np.array([float(y)]))
    return Ray(origins[0], directions[0])


# =============================================================================
# Stratégie 3 : sténopé reconstruit depuis les matrices
# =============================================================================


def offaxis_stereo_camera_from_xfm(cams: CameraMatrices) -> PinholeCamera:
    """Reconstruit l'écran fixe et l'œil à partir des matrices.

    Les coins du cube NDC sont ramenés dans l'espace CAVE ; les plans
    gauche/droite et bas/haut du frustum se coupent selon deux droites qui
    passent par l'œil. L'œil retenu est le milieu du plus court segment
    entre ces droites. Les coins d'écran sont ceux du plan far, rectangle
    parallèle à l'écran réel de même rapport d'aspect.

    Raises:
        ParallelPlanesError: Projection non perspective (orthographique...) en entrée.
        ExcessiveSkewError: Segment plus long que 1e-3 × diagonale du plan far.
    """
    if not cams.is_perspective:
        raise ParallelPlanesError(
            "Projection non perspective: la dernière ligne doit valoir (0, 0, -1, 0)"
        )
    cube = np.array(
        [[2 * i - 1, 2 * j - 1, 2 * k - 1] for i in (0, 1) for j in (0, 1) for k in (0, 1)],
        dtype=np.float64,
    )
    corners = unproject_ndc(cams.proj_inv, cams.view_inv, cube)
    v = {f"{i}{j}{k}": corners[4 * i + 2 * j + k] for i in (0, 1) for j in (0, 1) for k in (0, 1)}

    # arêtes de -z vers +z
    ez00 = normalize(v["001"] - v["000"])
    ez10 = normalize(v["101"] - v["100"])
    ez01 = normalize(v["011"] - v["010"])
    # arêtes de -y vers +y
    ey00 = normalize(v["010"] - v["000"])
    ey10 = normalize(v["110"] - v["100"])
    # arêtes de -x vers +x
    ex00 = normalize(v["100"] - v["000"])
    ex10 = normalize(v["110"] - v["010"])

    # normales sortantes du frustum
    n_left = normalize(np.cross(ey00, ez00))
    n_right = normalize(np.cross(ez10, ey10))
    n_bottom = normalize(np.cross(ez00, ex00))
    n_top = normalize(np.cross(ex10, ez01))

    line_lr = intersect_plane_plane(Plane(n_left, v["000"]), Plane(n_right, v["100"]))
    line_bt = intersect_plane_plane(Plane(n_bottom, v["000"]), Plane(n_top, v["010"]))
    p1, p2 = closest_segment_between_lines(line_lr, line_bt)

    ll, lr, ur = v["001"], v["101"], v["111"]
    diagonal = float(np.linalg.norm(ur - ll))
    gap = float(np.linalg.norm(p2 - p1))
    if gap > SKEW_TOLERANCE * diagonal:
        raise ExcessiveSkewError(
            f"Arêtes du frustum non concourantes (écart {gap:.3e} m, diagonale {diagonal:.3e} m)"
        )

    eye = 0.5 * (p1 + p2)
    logger.debug("Œil reconstruit %s (écart %.3e m)", eye, gap)
    return offaxis_stereo_camera(ScreenConfig(ll, lr, ur, name="far-plane"), eye)


# =============================================================================
# Lots de rayons
# =============================================================================


def depth_clip_range(
    origins: np.ndarray,
    directions: np.ndarray,
    eye: Vec3,
    forward: Vec3,
    znear: float,
    zfar: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Intervalles [tmin, tmax] bornés par les plans near et far.

    La profondeur d'un point est mesurée le long de ``forward`` depuis
    l'œil ; les plans sont perpendiculaires à ``forward``.
    """
    depth0 = (origins - eye) @ forward
    rate = directions @ forward
    safe_rate = np.where(rate > 1e-12, rate, 1.0)
    t_near = np.where(rate > 1e-12, (znear - depth0) / safe_rate, 0.0)
    t_far = np.where(rate > 1e-12, (zfar - depth0) / safe_rate, math.inf)
    tmin = np.maximum(t_near, 0.0)
    return tmin, np.maximum(t_far, tmin)


def generate_rays(
    strategy: Strategy | int,
    camera: CameraMatrices | PinholeCamera,
    grid: PixelGrid,
    clip: tuple[float, float] | None = None,
) -> RayBatch:
    """Rayons de tous les pixels de la grille, en ordre ligne par ligne.

    Args:
        strategy: 1 (matrices), 2 (sténopé) ou 3 (sténopé reconstruit).
        camera: ``CameraMatrices`` pour 1 et 3, ``PinholeCamera`` pour 2.
        grid: Grille de pixels.
        clip: ``(znear, zfar)`` optionnel pour borner tmin/tmax.
    """
    strategy = Strategy(strategy)
    xs, ys = grid.pixel_indices()

    if strategy is Strategy.PINHOLE:
        if not isinstance(camera, PinholeCamera):
            raise TypeError("La stratégie 2 attend une PinholeCamera")
        origins, directions = _pinhole_rays(camera, grid, xs, ys)
        eye, forward = camera.eye, camera.direction
    else:
        if not isinstance(camera, CameraMatrices):
            raise TypeError(f"La stratégie {int(strategy)} attend des CameraMatrices")
        if strategy is Strategy.MATRICES:
            origins, directions = _matrix_rays(camera, grid, xs, ys)
            eye, forward = camera.eye, camera.forward
        else:
            pinhole = offaxis_stereo_camera_from_xfm(camera)
            origins, directions = _pinhole_rays(pinhole, grid, xs, ys)
            eye, forward = pinhole.eye, pinhole.direction

    if clip is None:
        return RayBatch(origins, directions, grid)
    tmin, tmax = depth_clip_range(origins, directions, eye, forward, *clip)
    return RayBatch(origins, directions, grid, tmin, tmax)


@dataclass(frozen=True)
class RayDeviation:
    """Écart maximal entre deux lots de rayons censés être équivalents."""

    max_angle: float
    max_origin_distance: float

    def within(self, angle_tol: float, distance_tol: float) -> bool:
        return self.max_angle < angle_tol and self.max_origin_distance < distance_tol


def _origin_to_line(points: np.ndarray, origins: np.ndarray, directions: np.ndarray) -> np.ndarray:
    w = points - origins
    along = np.einsum("ij,ij->i", w, directions)
    return np.linalg.norm(w - along[:, None] * directions, axis=-1)


def compare_ray_batches(a: RayBatch, b: RayBatch) -> RayDeviation:
    """Compare deux lots pixel à pixel sur la droite portée par chaque rayon.

    Les origines peuvent différer (plan near contre œil) : on mesure la
    distance de chaque origine à la droite de l'autre rayon.
    """
    if len(a) != len(b):
        raise ValueError(f"Lots de tailles différentes: {len(a)} != {len(b)}")
    cross = np.linalg.norm(np.cross(a.directions, b.directions), axis=-1)
    dot = np.einsum("ij,ij->i", a.directions, b.directions)
    angles = np.arctan2(cross, dot)
    distances = np.maximum(
        _origin_to_line(a.origins, b.origins, b.directions),
        _origin_to_line(b.origins, a.origins, a.directions),
    )
    return RayDeviation(float(angles.max()), float(distances.max()))


def camera_for_strategy(
    strategy: Strategy | int,
    screen: ScreenConfig,
    eye: Vec3,
    znear: float = DEFAULT_ZNEAR,
    zfar: float = DEFAULT_ZFAR,
) -> CameraMatrices | PinholeCamera:
    """Forme de caméra attendue par ``generate_rays`` pour une stratégie."""
    if Strategy(strategy) is Strategy.PINHOLE:
        return offaxis_stereo_camera(screen, eye)
    return offaxis_stereo_transform(screen, eye, znear, zfar)
