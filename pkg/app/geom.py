"""
Primitives géométriques 3D/4D pour caveray.

Conventions :
- Vec3 est un ``np.ndarray`` float64 de forme (3,), Mat4 un ``np.ndarray``
  de forme (4, 4).
- Les matrices agissent sur des vecteurs colonnes homogènes par
  multiplication à gauche (``m @ v``), comme OpenGL/glm.
  Le stockage linéaire échangé avec un hôte graphique est en ordre
  colonne (voir ``to_column_major``).
- Toutes les longueurs sont en mètres, dans l'espace CAVE.
"""

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

Vec3 = np.ndarray
Mat4 = np.ndarray

DET_EPSILON = 1e-12
W_EPSILON = 1e-12
PARALLEL_EPSILON = 1e-9
UNIT_TOLERANCE = 1e-6


class GeometryError(ValueError):
    """Erreur géométrique de base (entrée dégénérée ou hors domaine)."""


class DegenerateFrustumError(GeometryError):
    """Étendue du frustum nulle ou plans near/far invalides."""


class SingularMatrixError(GeometryError):
    """Matrice non inversible (|det| sous le seuil)."""


class UnprojectionError(GeometryError):
    """Coordonnée homogène w quasi nulle pendant la déprojection."""


class ParallelPlanesError(GeometryError):
    """Deux plans parallèles n'ont pas de droite d'intersection."""


class ParallelLinesError(GeometryError):
    """Deux droites parallèles n'ont pas de segment le plus court unique."""


class DegenerateScreenError(GeometryError):
    """Coins d'écran confondus ou colinéaires."""


def vec3(*components: float | Iterable[float]) -> Vec3:
    """Construit un Vec3 float64 depuis trois scalaires ou un itérable.

    Raises:
        GeometryError: Si la forme n'est pas (3,) ou si une composante
            n'est pas finie.
    """
    if len(components) == 1:
        v = np.asarray(components[0], dtype=np.float64)
    else:
        v = np.asarray(components, dtype=np.float64)
    if v.shape != (3,):
        raise GeometryError(f"Vec3 attendu, forme reçue {v.shape}")
    if not np.all(np.isfinite(v)):
        raise GeometryError(f"Vec3 non fini: {v}")
    return v


def normalize(v: Vec3) -> Vec3:
    """Normalise un vecteur (erreur si sa norme est quasi nulle)."""
    n = float(np.linalg.norm(v))
    if n < DET_EPSILON:
        raise GeometryError("Impossible de normaliser un vecteur nul")
    return np.asarray(v, dtype=np.float64) / n


def is_unit(v: Vec3, tol: float = UNIT_TOLERANCE) -> bool:
    return abs(float(np.linalg.norm(v)) - 1.0) <= tol


@dataclass(frozen=True, eq=False)
class Plane:
    """Plan défini par une normale unitaire et un point d'ancrage."""

    normal: Vec3
    point: Vec3

    def __post_init__(self):
        object.__setattr__(self, "normal", vec3(self.normal))
        object.__setattr__(self, "point", vec3(self.point))
        if not is_unit(self.normal):
            raise GeometryError(f"Normale de plan non unitaire: {self.normal}")

    @classmethod
    def from_normal_point(cls, normal: Vec3, point: Vec3) -> "Plane":
        return cls(normalize(vec3(normal)), point)

    def signed_distance(self, p: Vec3) -> float:
        return float(np.dot(self.normal, np.asarray(p) - self.point))


@dataclass(frozen=True, eq=False)
class Line:
    """Droite paramétrée ``point + t * direction`` (direction unitaire)."""

    point: Vec3
    direction: Vec3

    def __post_init__(self):
        object.__setattr__(self, "point", vec3(self.point))
        object.__setattr__(self, "direction", vec3(self.direction))
        if not is_unit(self.direction):
            raise GeometryError(f"Direction de droite non unitaire: {self.direction}")

    def at(self, t: float) -> Vec3:
        return self.point + t * self.direction


# =============================================================================
# Matrices
# =============================================================================


def frustum_matrix(
    left: float, right: float, bottom: float, top: float, znear: float, zfar: float
) -> Mat4:
    """Matrice de projection perspective façon ``glFrustum``.

    Envoie l'espace œil (œil à l'origine, regard vers -z) dans l'espace de
    découpe ; après division perspective, z_ndc = -1 sur le plan near et
    +1 sur le plan far.

    Raises:
        DegenerateFrustumError: Si une étendue est sous 1e-12 ou si
            ``0 < znear < zfar`` n'est pas respecté.
    """
    if znear <= 0:
        raise DegenerateFrustumError(f"znear doit être > 0 (reçu {znear})")
    width, height, depth = right - left, top - bottom, zfar - znear
    if width < DET_EPSILON or height < DET_EPSILON or depth < DET_EPSILON:
        raise DegenerateFrustumError(
            f"Frustum dégénéré: largeur={width}, hauteur={height}, profondeur={depth}"
        )

    return np.array(
        [
            [2.0 * znear / width, 0.0, (right + left) / width, 0.0],
            [0.0, 2.0 * znear / height, (top + bottom) / height, 0.0],
            [0.0, 0.0, -(zfar + znear) / depth, -2.0 * zfar * znear / depth],
            [0.0, 0.0, -1.0, 0.0],
        ],
        dtype=np.float64,
    )


def invert(m: Mat4) -> Mat4:
    """Inverse une Mat4 (élimination de Gauss via LAPACK).

    Raises:
        SingularMatrixError: Si |det(m)| < 1e-12.
    """
    m = np.asarray(m, dtype=np.float64)
    det = float(np.linalg.det(m))
    if not np.isfinite(det) or abs(det) < DET_EPSILON:
        raise SingularMatrixError(f"Matrice singulière (det={det:.3e})")
    return np.linalg.inv(m)


def to_column_major(m: Mat4) -> tuple[float, ...]:
    """Aplatie une Mat4 en 16 flottants, ordre colonne (format glGet)."""
    return tuple(float(x) for x in np.ravel(m, order="F"))


def from_column_major(values: Iterable[float]) -> Mat4:
    """Reconstruit une Mat4 depuis 16 flottants en ordre colonne."""
    flat = np.asarray(list(values), dtype=np.float64)
    if flat.shape != (16,):
        raise GeometryError(f"16 valeurs attendues, {flat.size} reçues")
    return flat.reshape((4, 4), order="F")


def _apply_homogeneous(m: Mat4, points: np.ndarray) -> np.ndarray:
    """Applique m à des points (..., 3) puis divise par w."""
    ones = np.ones(points.shape[:-1] + (1,), dtype=np.float64)
    h = np.concatenate([points, ones], axis=-1) @ m.T
    w = h[..., 3:4]
    if np.any(np.abs(w) < W_EPSILON):
        raise UnprojectionError("Coordonnée w quasi nulle pendant la transformation")
    return h[..., :3] / w


def unproject_ndc(proj_inv: Mat4, view_inv: Mat4, ndc) -> np.ndarray:
    """Transforme des coordonnées NDC vers l'espace CAVE.

    Calcule ``view_inv · (proj_inv · (ndc, 1))`` avec division perspective
    après chaque multiplication. Accepte un point (3,) ou un lot (..., 3).

    Raises:
        UnprojectionError: Si |w| < 1e-12 à l'une des étapes.
    """
    ndc = np.asarray(ndc, dtype=np.float64)
    eye_space = _apply_homogeneous(np.asarray(proj_inv, dtype=np.float64), ndc)
    return _apply_homogeneous(np.asarray(view_inv, dtype=np.float64), eye_space)


def project(proj: Mat4, view: Mat4, points) -> np.ndarray:
    """Opération inverse de ``unproject_ndc`` : espace CAVE vers NDC."""
    points = np.asarray(points, dtype=np.float64)
    return _apply_homogeneous(np.asarray(proj) @ np.asarray(view), points)


# =============================================================================
# Plans, droites et repère d'écran
# =============================================================================


def intersect_plane_plane(a: Plane, b: Plane) -> Line:
    """Droite d'intersection de deux plans.

    Le point de la droite est obtenu par l'intersection de trois plans, le
    troisième passant par l'origine avec pour normale la direction de la
    droite.

    Raises:
        ParallelPlanesError: Si |a.normal × b.normal| <= 1e-9.
    """
    v = np.cross(a.normal, b.normal)
    vn = float(np.linalg.norm(v))
    if vn <= PARALLEL_EPSILON:
        raise ParallelPlanesError("Plans parallèles: pas de droite d'intersection")
    v = v / vn

    d1 = float(np.dot(a.normal, a.point))
    d2 = float(np.dot(b.normal, b.point))
    n2v = np.cross(b.normal, v)
    p0 = (d1 * n2v + d2 * np.cross(v, a.normal)) / float(np.dot(a.normal, n2v))
    return Line(p0, v)


def closest_segment_between_lines(a: Line, b: Line) -> tuple[Vec3, Vec3]:
    """Extrémités (p1 sur a, p2 sur b) du plus court segment entre deux droites.

    Raises:
        ParallelLinesError: Si |a.direction × b.direction| <= 1e-9.
    """
    if float(np.linalg.norm(np.cross(a.direction, b.direction))) <= PARALLEL_EPSILON:
        raise ParallelLinesError("Droites parallèles: segment le plus court non unique")

    w0 = a.point - b.point
    cos_ab = float(np.dot(a.direction, b.direction))
    d = float(np.dot(a.direction, w0))
    e = float(np.dot(b.direction, w0))
    denom = 1.0 - cos_ab * cos_ab

    s = (cos_ab * e - d) / denom
    t = (e - cos_ab * d) / denom
    return a.at(s), b.at(t)


def screen_basis(ll: Vec3, lr: Vec3, ur: Vec3) -> tuple[Vec3, Vec3, Vec3]:
    """Repère (X, Y, Z) d'un écran défini par trois coins.

    X suit le bord inférieur (LL vers LR), Y le bord droit (LR vers UR) et
    Z = X × Y pointe vers l'observateur. Z est renormalisé : seule la
    non-colinéarité est exigée ici, la rectangularité est contrôlée par
    ``app.offaxis``.

    Raises:
        DegenerateScreenError: Coins confondus ou colinéaires.
    """
    ll, lr, ur = vec3(ll), vec3(lr), vec3(ur)
    ex, ey = lr - ll, ur - lr
    lx, ly = float(np.linalg.norm(ex)), float(np.linalg.norm(ey))
    if lx <= PARALLEL_EPSILON or ly <= PARALLEL_EPSILON:
        raise DegenerateScreenError("Coins d'écran confondus")

    x, y = ex / lx, ey / ly
    z = np.cross(x, y)
    zn = float(np.linalg.norm(z))
    if zn <= PARALLEL_EPSILON:
        raise DegenerateScreenError("Coins d'écran colinéaires")
    return x, y, z / zn
