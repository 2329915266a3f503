"""
Gestion de la configuration pour caveray.

Le fichier de configuration est un YAML à sections imbriquées (grammaire
détaillée dans le README). Toutes les longueurs sont en mètres.
"""

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .geom import GeometryError, vec3
from .offaxis import (
    DEFAULT_ZFAR,
    DEFAULT_ZNEAR,
    ScreenConfig,
    StereoRig,
    check_rectangular,
    frustum_distances,
    stereo_eyes,
)
from .raygen import PixelGrid, Strategy
from .render import SCENES

PROJECT_ROOT = Path(__file__).parent.parent
CONFIGS_DIR = PROJECT_ROOT / "configs"

DEFAULT_IPD = 0.063
DEFAULT_RESOLUTION = 512
DEFAULT_STRATEGY = "2"
DEFAULT_OUTPUT = "renders/cave"
STRATEGY_CHOICES = ("1", "2", "3", "all")

TOP_LEVEL_KEYS = {
    "screen", "screens", "head", "ipd", "image", "strategy",
    "znear", "zfar", "scene", "output", "depth_clip",
}
SCREEN_KEYS = {"name", "lower_left", "lower_right", "upper_right"}


class ConfigError(ValueError):
    """Erreur de configuration (syntaxe ou validation)."""


class ConfigParseError(ConfigError):
    """YAML mal formé."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (ligne {line}, colonne {column})" if line is not None else ""
        super().__init__(f"Erreur de syntaxe{where}: {message}")


class ConfigValidationError(ConfigError):
    """Valeur de configuration qui viole un invariant."""

    def __init__(self, field: str, message: str, line: int | None = None):
        self.field = field
        self.line = line
        where = f" (ligne {line})" if line is not None else ""
        super().__init__(f"{field}{where}: {message}")


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Configuration complète et validée d'une exécution."""

    screens: tuple[ScreenConfig, ...]
    rig: StereoRig
    width: int = DEFAULT_RESOLUTION
    height: int = DEFAULT_RESOLUTION
    strategy: str = DEFAULT_STRATEGY
    znear: float = DEFAULT_ZNEAR
    zfar: float = DEFAULT_ZFAR
    scene: str = "default"
    output: str = DEFAULT_OUTPUT
    depth_clip: bool = False

    @property
    def strategies(self) -> list[Strategy]:
        if self.strategy == "all":
            return list(Strategy)
        return [Strategy(int(self.strategy))]

    @property
    def grid(self) -> PixelGrid:
        return PixelGrid(self.width, self.height)

    @property
    def clip(self) -> tuple[float, float] | None:
        return (self.znear, self.zfar) if self.depth_clip else None

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Applique les options CLI non nulles (stratégie, résolution, sortie, scène)."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        if "strategy" in changes:
            changes["strategy"] = _strategy(changes["strategy"], "--strategy", None)
        for key in ("width", "height"):
            if key in changes and changes[key] < 1:
                raise ConfigValidationError(f"--{key}", "doit être >= 1")
        if "scene" in changes and changes["scene"] not in SCENES:
            raise ConfigValidationError("--scene", f"scène inconnue '{changes['scene']}'")
        return replace(self, **changes)


# =============================================================================
# Lecture
# =============================================================================


def _key_lines(node: yaml.Node, prefix: str = "") -> dict[str, int]:
    """Associe chaque chemin de clé (``screens[1].lower_left``) à sa ligne."""
    lines = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
            lines[path] = key_node.start_mark.line + 1
            lines.update(_key_lines(value_node, path))
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            path = f"{prefix}[{i}]"
            lines[path] = item.start_mark.line + 1
            lines.update(_key_lines(item, path))
    return lines


class _Fields:
    """Accès typé aux champs avec erreurs localisées."""

    def __init__(self, lines: dict[str, int]):
        self.lines = lines

    def error(self, path: str, message: str) -> ConfigValidationError:
        return ConfigValidationError(path, message, self.lines.get(path))

    def mapping(self, value: Any, path: str, allowed: set[str]) -> dict:
        if not isinstance(value, dict):
            raise self.error(path, "une section (mapping) est attendue")
        unknown = sorted(set(value) - allowed)
        if unknown:
            raise self.error(f"{path}.{unknown[0]}" if path else unknown[0], "clé inconnue")
        return value

    def number(self, value: Any, path: str) -> float:
        # YAML 1.1 lit 1e-3 comme une chaîne (pas de point décimal)
        if isinstance(value, bool) or not isinstance(value, int | float | str):
            raise self.error(path, f"nombre attendu, reçu {value!r}")
        try:
            number = float(value.strip() if isinstance(value, str) else value)
        except (OverflowError, ValueError):
            raise self.error(path, f"nombre attendu, reçu {value!r}") from None
        if not math.isfinite(number):
            raise self.error(path, "valeur non finie")
        return number

    def integer(self, value: Any, path: str) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(path, f"entier attendu, reçu {value!r}")
        if value < 1:
            raise self.error(path, "doit être >= 1")
        return value

    def triple(self, value: Any, path: str) -> np.ndarray:
        if not isinstance(value, list) or len(value) != 3:
            raise self.error(path, "triplet [x, y, z] attendu")
        return vec3([self.number(c, f"{path}[{i}]") for i, c in enumerate(value)])


def _strategy(value: Any, path: str, fields: _Fields | None) -> str:
    text = str(value).strip().lower()
    if text not in STRATEGY_CHOICES:
        message = f"stratégie invalide '{value}' (choix: 1, 2, 3, all)"
        raise fields.error(path, message) if fields else ConfigValidationError(path, message)
    return text


def _screen(raw: Any, path: str, fields: _Fields, default_name: str) -> ScreenConfig:
    raw = fields.mapping(raw, path, SCREEN_KEYS)
    for key in ("lower_left", "lower_right", "upper_right"):
        if key not in raw:
            raise fields.error(path, f"coin '{key}' manquant")
    name = str(raw.get("name", default_name))
    corners = [fields.triple(raw[key], f"{path}.{key}") for key in ("lower_left", "lower_right", "upper_right")]
    try:
        screen = ScreenConfig(*corners, name=name)
        check_rectangular(screen)
    except GeometryError as e:
        raise fields.error(path, str(e)) from e
    return screen


def parse_config(text: str) -> RunConfig:
    """Analyse et valide un texte de configuration YAML.

    Args:
        text: Contenu YAML.

    Returns:
        RunConfig validée, valeurs par défaut appliquées.

    Raises:
        ConfigParseError: YAML mal formé (avec ligne/colonne).
        ConfigValidationError: Invariant violé (avec champ et ligne).
    """
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark else None
        column = mark.column + 1 if mark else None
        raise ConfigParseError(str(getattr(e, "problem", None) or e), line, column) from e

    if not isinstance(data, dict):
        raise ConfigParseError("la racine doit être une section clé/valeur")

    fields = _Fields(_key_lines(root) if root is not None else {})
    data = fields.mapping(data, "", TOP_LEVEL_KEYS)

    # Écrans
    if ("screen" in data) == ("screens" in data):
        raise ConfigValidationError("screen", "définir exactement l'une des clés 'screen' ou 'screens'")
    if "screen" in data:
        screens = (_screen(data["screen"], "screen", fields, "screen"),)
    else:
        raw_screens = data["screens"]
        if not isinstance(raw_screens, list) or not raw_screens:
            raise fields.error("screens", "liste non vide d'écrans attendue")
        screens = tuple(
            _screen(raw, f"screens[{i}]", fields, f"wall{i}") for i, raw in enumerate(raw_screens)
        )
        names = [s.name for s in screens]
        if len(set(names)) != len(names):
            raise fields.error("screens", f"noms d'écrans dupliqués: {names}")

    # Tête et stéréo
    if "head" not in data:
        raise ConfigValidationError("head", "section 'head' manquante")
    head = fields.mapping(data["head"], "head", {"position", "right"})
    if "position" not in head:
        raise fields.error("head", "'position' manquante")
    position = fields.triple(head["position"], "head.position")
    right = fields.triple(head.get("right", [1.0, 0.0, 0.0]), "head.right")
    if np.linalg.norm(right) < 1e-9:
        raise fields.error("head.right", "axe nul")
    right = right / np.linalg.norm(right)

    ipd = fields.number(data.get("ipd", DEFAULT_IPD), "ipd")
    if ipd < 0:
        raise fields.error("ipd", f"doit être >= 0 (reçu {ipd})")
    rig = StereoRig(position, right, ipd)

    # Image, projection, sortie
    image = fields.mapping(data.get("image", {}), "image", {"width", "height"})
    width = fields.integer(image.get("width", DEFAULT_RESOLUTION), "image.width")
    height = fields.integer(image.get("height", DEFAULT_RESOLUTION), "image.height")

    strategy = _strategy(data.get("strategy", DEFAULT_STRATEGY), "strategy", fields)
    znear = fields.number(data.get("znear", DEFAULT_ZNEAR), "znear")
    zfar = fields.number(data.get("zfar", DEFAULT_ZFAR), "zfar")
    if znear <= 0:
        raise fields.error("znear", "doit être > 0")
    if zfar <= znear:
        raise fields.error("zfar", "doit être > znear")

    scene = str(data.get("scene", "default"))
    if scene not in SCENES:
        raise fields.error("scene", f"scène inconnue '{scene}' (disponibles: {', '.join(SCENES)})")
    output = data.get("output", DEFAULT_OUTPUT)
    if not isinstance(output, str) or not output.strip():
        raise fields.error("output", "préfixe de sortie vide")
    depth_clip = data.get("depth_clip", False)
    if not isinstance(depth_clip, bool):
        raise fields.error("depth_clip", "booléen attendu")

    # L'œil de chaque côté doit être devant chaque écran et s'y projeter
    for i, screen in enumerate(screens):
        path = "screen" if "screen" in data else f"screens[{i}]"
        for eye in (position, *stereo_eyes(rig)):
            try:
                frustum_distances(screen, eye)
            except GeometryError as e:
                raise ConfigValidationError(
                    "head.position", f"{e} (écran {path})", fields.lines.get("head.position")
                ) from e

    return RunConfig(
        screens=screens,
        rig=rig,
        width=width,
        height=height,
        strategy=strategy,
        znear=znear,
        zfar=zfar,
        scene=scene,
        output=output,
        depth_clip=depth_clip,
    )


def resolve_config_path(config_name: str) -> Path:
    """Nom court (résolu dans configs/) ou chemin complet."""
    if config_name.endswith((".yaml", ".yml")):
        return Path(config_name)
    return CONFIGS_DIR / f"{config_name}.yaml"


def load_config(config_name: str) -> RunConfig:
    """Charge et valide un fichier de configuration YAML.

    Args:
        config_name: Nom du fichier (sans extension) ou chemin complet.

    Raises:
        FileNotFoundError: Si le fichier n'existe pas.
        ConfigError: Si le contenu est invalide ou n'est pas en UTF-8.
        OSError: Si le fichier ne peut pas être lu (répertoire, droits).
    """
    config_path = resolve_config_path(config_name)
    if not config_path.exists():
        raise FileNotFoundError(f"Configuration non trouvée: {config_path}")

    with open(config_path, encoding="utf-8") as f:
        try:
            text = f.read()
        except UnicodeDecodeError as e:
            raise ConfigParseError(f"fichier non UTF-8: {e.reason}") from e
    return parse_config(text)
