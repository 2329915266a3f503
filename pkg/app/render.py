"""
Lancer de rayons minimal et déterministe pour produire des paires stéréo.

Scènes analytiques (sphères + sol en damier), éclairage lambertien à un
rebond avec 10% d'ambiant, quantification linéaire 8 bits, sortie PPM P6.
"""

import logging
import math
import os
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geom import GeometryError, Vec3, normalize, vec3
from .offaxis import DEFAULT_ZFAR, DEFAULT_ZNEAR, ScreenConfig, StereoRig, stereo_eyes
from .raygen import PixelGrid, Ray, RayBatch, Strategy, camera_for_strategy, generate_rays

logger = logging.getLogger(__name__)

AMBIENT = 0.1
GRAZING_TOLERANCE = 1e-9
THREADS_ENV = "OFFAXIS_THREADS"


@dataclass(frozen=True, eq=False)
class Sphere:
    center: Vec3
    radius: float
    albedo: Vec3

    def __post_init__(self):
        object.__setattr__(self, "center", vec3(self.center))
        object.__setattr__(self, "albedo", _rgb(self.albedo))
        if not self.radius > 0:
            raise GeometryError(f"Rayon de sphère invalide: {self.radius}")


@dataclass(frozen=True, eq=False)
class CheckerPlane:
    """Plan infini en damier ; la parité des cases alterne les deux albédos."""

    point: Vec3
    normal: Vec3
    albedo_even: Vec3
    albedo_odd: Vec3
    period: float

    def __post_init__(self):
        object.__setattr__(self, "point", vec3(self.point))
        object.__setattr__(self, "normal", normalize(vec3(self.normal)))
        object.__setattr__(self, "albedo_even", _rgb(self.albedo_even))
        object.__setattr__(self, "albedo_odd", _rgb(self.albedo_odd))
        if not self.period > 0:
            raise GeometryError(f"Période de damier invalide: {self.period}")

    @property
    def tangents(self) -> tuple[Vec3, Vec3]:
        """Axes (u, v) du plan, déterministes pour une normale donnée."""
        helper = np.array([1.0, 0.0, 0.0]) if abs(self.normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        u = normalize(helper - np.dot(helper, self.normal) * self.normal)
        return u, np.cross(self.normal, u)

    def in_plane_coords(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u, v = self.tangents
        rel = np.asarray(points) - self.point
        return rel @ u, rel @ v

    def albedo_at(self, points: np.ndarray) -> np.ndarray:
        a, b = self.in_plane_coords(points)
        parity = (np.floor(a / self.period) + np.floor(b / self.period)) % 2
        return np.where(parity[..., None] == 0, self.albedo_even, self.albedo_odd)


@dataclass(frozen=True, eq=False)
class DirectionalLight:
    direction: Vec3
    intensity: Vec3 = field(default_factory=lambda: np.ones(3))

    def __post_init__(self):
        object.__setattr__(self, "direction", normalize(vec3(self.direction)))
        object.__setattr__(self, "intensity", vec3(self.intensity))


@dataclass(frozen=True, eq=False)
class Scene:
    spheres: tuple[Sphere, ...] = ()
    planes: tuple[CheckerPlane, ...] = ()
    light: DirectionalLight = field(default_factory=lambda: DirectionalLight((0.0, -1.0, 0.0)))
    background: Vec3 = field(default_factory=lambda: np.array([0.05, 0.05, 0.08]))

    def __post_init__(self):
        object.__setattr__(self, "spheres", tuple(self.spheres))
        object.__setattr__(self, "planes", tuple(self.planes))
        object.__setattr__(self, "background", _rgb(self.background))


@dataclass(frozen=True, eq=False)
class Hit:
    t: float
    point: Vec3
    normal: Vec3
    albedo: Vec3
    object_id: int


@dataclass(eq=False)
class Image:
    """Image linéaire flottante (ligne 0 en bas) + identifiants d'objets."""

    width: int
    height: int
    pixels: np.ndarray
    object_ids: np.ndarray | None = None

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError(
                f"Tampon {self.pixels.shape} incompatible avec {self.width}x{self.height}"
            )

    def to_rgb8(self) -> np.ndarray:
        return np.round(255.0 * np.clip(self.pixels, 0.0, 1.0)).astype(np.uint8)


@dataclass(eq=False)
class StereoPair:
    left: Image
    right: Image
    side_by_side: Image


def _rgb(value) -> np.ndarray:
    rgb = vec3(value)
    if np.any(rgb < 0):
        raise GeometryError(f"Couleur négative: {rgb}")
    return rgb


# =============================================================================
# Intersection et ombrage
# =============================================================================


def _sphere_hits(sphere: Sphere, origins, directions, tmin, tmax) -> np.ndarray:
    oc = origins - sphere.center
    b = np.einsum("ij,ij->i", oc, directions)
    c = np.einsum("ij,ij->i", oc, oc) - sphere.radius**2
    disc = b * b - c
    root = np.sqrt(np.maximum(disc, 0.0))
    t1, t2 = -b - root, -b + root
    t = np.where((t1 >= tmin) & (t1 <= tmax), t1, np.where((t2 >= tmin) & (t2 <= tmax), t2, math.inf))
    return np.where(disc >= -GRAZING_TOLERANCE, t, math.inf)


def _plane_hits(plane: CheckerPlane, origins, directions, tmin, tmax) -> np.ndarray:
    denom = directions @ plane.normal
    safe = np.where(np.abs(denom) > 1e-12, denom, 1.0)
    t = ((plane.point - origins) @ plane.normal) / safe
    valid = (np.abs(denom) > 1e-12) & (t >= tmin) & (t <= tmax)
    return np.where(valid, t, math.inf)


def _trace(scene: Scene, origins, directions, tmin, tmax):
    """Intersection la plus proche pour un lot : (t, points, normales, albédos, ids)."""
    n = len(origins)
    primitives = [*scene.spheres, *scene.planes]
    if not primitives:
        return np.full(n, math.inf), np.zeros((n, 3)), np.zeros((n, 3)), np.zeros((n, 3)), np.full(n, -1)

    ts = np.stack(
        [
            _sphere_hits(p, origins, directions, tmin, tmax)
            if isinstance(p, Sphere)
            else _plane_hits(p, origins, directions, tmin, tmax)
            for p in primitives
        ]
    )
    ids = np.argmin(ts, axis=0)
    t = ts[ids, np.arange(n)]
    hit = np.isfinite(t)
    ids = np.where(hit, ids, -1)

    points = origins + np.where(hit, t, 0.0)[:, None] * directions
    normals = np.zeros((n, 3))
    albedos = np.zeros((n, 3))
    for k, prim in enumerate(primitives):
        mask = ids == k
        if not np.any(mask):
            continue
        if isinstance(prim, Sphere):
            normals[mask] = (points[mask] - prim.center) / prim.radius
            albedos[mask] = prim.albedo
        else:
            # normale tournée vers l'origine du rayon
            facing = np.where((directions[mask] @ prim.normal) < 0, 1.0, -1.0)
            normals[mask] = facing[:, None] * prim.normal
            albedos[mask] = prim.albedo_at(points[mask])
    return t, points, normals, albedos, ids


def _shade(scene: Scene, normals: np.ndarray, albedos: np.ndarray) -> np.ndarray:
    lambert = np.maximum(0.0, normals @ -scene.light.direction)
    return albedos * scene.light.intensity * (lambert + AMBIENT)[:, None]


def intersect_scene(ray: Ray, scene: Scene) -> Hit | None:
    """Intersection la plus proche avec t dans [tmin, tmax], ou None."""
    t, points, normals, albedos, ids = _trace(
        scene,
        ray.origin[None, :],
        ray.direction[None, :],
        np.array([ray.tmin]),
        np.array([ray.tmax]),
    )
    if ids[0] < 0:
        return None
    return Hit(float(t[0]), points[0], normals[0], albedos[0], int(ids[0]))


def shade(hit: Hit, scene: Scene) -> np.ndarray:
    """Couleur linéaire (non bornée) : lambertien + 10% d'ambiant."""
    return _shade(scene, hit.normal[None, :], hit.albedo[None, :])[0]


# =============================================================================
# Rendu
# =============================================================================


def render_threads() -> int:
    """Nombre de threads de rendu, plafonné par OFFAXIS_THREADS."""
    available = os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            return max(1, min(available, int(cap)))
        except ValueError:
            logger.warning("%s invalide (%r), ignoré", THREADS_ENV, cap)
    return available


def shade_rays(scene: Scene, rays: RayBatch, threads: int | None = None) -> Image:
    """Ombre un lot de rayons ; les lignes sont réparties par blocs disjoints."""
    grid = rays.grid
    pixels = np.empty((grid.size, 3))
    object_ids = np.empty(grid.size, dtype=np.int64)

    def fill(rows: np.ndarray) -> None:
        if rows.size == 0:
            return
        sl = slice(int(rows[0]) * grid.width, (int(rows[-1]) + 1) * grid.width)
        t, _, normals, albedos, ids = _trace(
            scene, rays.origins[sl], rays.directions[sl], rays.tmin[sl], rays.tmax[sl]
        )
        color = _shade(scene, normals, albedos)
        pixels[sl] = np.where((ids >= 0)[:, None], color, scene.background)
        object_ids[sl] = ids

    workers = min(threads or render_threads(), grid.height)
    chunks = np.array_split(np.arange(grid.height), workers)
    logger.debug("Rendu %dx%d sur %d blocs", grid.width, grid.height, len(chunks))
    if workers == 1:
        fill(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, chunks))

    return Image(
        grid.width,
        grid.height,
        pixels.reshape(grid.height, grid.width, 3),
        object_ids.reshape(grid.height, grid.width),
    )


def render_view(
    scene: Scene,
    strategy: Strategy | int,
    camera,
    grid: PixelGrid,
    clip: tuple[float, float] | None = None,
    threads: int | None = None,
) -> Image:
    """Rend une vue ; le pixel (x, y) est ombré avec le rayon généré en (x, y)."""
    return shade_rays(scene, generate_rays(strategy, camera, grid, clip), threads)


def side_by_side(left: Image, right: Image) -> Image:
    """Concaténation horizontale, œil gauche à gauche."""
    if left.height != right.height:
        raise ValueError("Les deux vues doivent avoir la même hauteur")
    ids = None
    if left.object_ids is not None and right.object_ids is not None:
        ids = np.concatenate([left.object_ids, right.object_ids], axis=1)
    return Image(
        left.width + right.width,
        left.height,
        np.concatenate([left.pixels, right.pixels], axis=1),
        ids,
    )


def render_stereo_pair(
    scene: Scene,
    screen: ScreenConfig,
    rig: StereoRig,
    strategy: Strategy | int,
    grid: PixelGrid,
    znear: float = DEFAULT_ZNEAR,
    zfar: float = DEFAULT_ZFAR,
    depth_clip: bool = False,
    threads: int | None = None,
) -> StereoPair:
    """Vues gauche/droite depuis ``stereo_eyes(rig)`` + image côte à côte."""
    clip = (znear, zfar) if depth_clip else None
    views = [
        render_view(
            scene, strategy, camera_for_strategy(strategy, screen, eye, znear, zfar), grid, clip, threads
        )
        for eye in stereo_eyes(rig)
    ]
    return StereoPair(views[0], views[1], side_by_side(*views))


# =============================================================================
# Scènes intégrées
# =============================================================================


def default_scene(screen: ScreenConfig) -> Scene:
    """Sol en damier + trois sphères devant / sur / derrière le plan de l'écran.

    Tout est placé relativement à l'écran pour que les tests de disparité
    ne dépendent pas de sa position dans la CAVE.
    """
    x, y, z = screen.basis
    c, w, h = screen.center, screen.width, screen.height
    radius = 0.08 * min(w, h)
    spheres = (
        Sphere(c - 0.2 * w * x + 0.2 * h * z, radius, (0.9, 0.2, 0.2)),
        Sphere(c + 0.1 * h * y, radius, (0.2, 0.9, 0.2)),
        Sphere(c + 0.2 * w * x - 0.15 * h * y - 0.5 * h * z, radius, (0.2, 0.3, 0.9)),
    )
    floor = CheckerPlane(
        point=c - 0.5 * h * y,
        normal=y,
        albedo_even=(0.85, 0.85, 0.85),
        albedo_odd=(0.25, 0.25, 0.25),
        period=0.25 * h,
    )
    light = DirectionalLight(-y - 0.5 * z + 0.3 * x)
    return Scene(spheres, (floor,), light)


def empty_scene(screen: ScreenConfig) -> Scene:
    return Scene(light=DirectionalLight(-screen.basis[1]))


SCENES: dict[str, Callable[[ScreenConfig], Scene]] = {
    "default": default_scene,
    "empty": empty_scene,
}


def build_scene(name: str, screen: ScreenConfig) -> Scene:
    if name not in SCENES:
        raise KeyError(f"Scène inconnue: {name} (disponibles: {', '.join(SCENES)})")
    return SCENES[name](screen)


# =============================================================================
# PPM
# =============================================================================


def encode_ppm(image: Image) -> bytes:
    """PPM binaire P6 ; les lignes sont émises de haut en bas."""
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.to_rgb8()[::-1].tobytes()


def decode_ppm(data: bytes) -> Image:
    """Relit un PPM P6 produit par ``encode_ppm`` (valeurs quantifiées)."""
    magic, dims, maxval, body = data.split(b"\n", 3)
    if magic != b"P6" or maxval != b"255":
        raise ValueError("PPM P6 8 bits attendu")
    width, height = (int(v) for v in dims.split())
    rgb = np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)[::-1]
    return Image(width, height, rgb.astype(np.float64) / 255.0)


def write_ppm(path: Path, image: Image) -> None:
    Path(path).write_bytes(encode_ppm(image))


def write_ppm_set(images: dict[Path, Image]) -> list[Path]:
    """Écrit un ensemble d'images en tout-ou-rien.

    Chaque image passe par un fichier ``.tmp`` renommé une fois toutes les
    écritures réussies ; en cas d'échec aucun fichier partiel ne subsiste.

    Raises:
        OSError: Si un répertoire ou un fichier ne peut être écrit.
    """
    staged: list[tuple[Path, Path]] = []
    done: list[Path] = []
    try:
        for path, image in images.items():
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_name(path.name + ".tmp")
            staged.append((tmp, path))
            write_ppm(tmp, image)
        for tmp, path in staged:
            os.replace(tmp, path)
            done.append(path)
    except OSError:
        for leftover in [tmp for tmp, _ in staged] + done:
            leftover.unlink(missing_ok=True)
        raise
    return done
