"""
Interface CLI pour caveray.

Les messages humains vont sur stderr (rich), les rapports ``clé = valeur``
sur stdout.
"""

import logging
from itertools import combinations
from pathlib import Path

import numpy as np
import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .config import ConfigError, RunConfig, load_config
from .geom import GeometryError, to_column_major
from .offaxis import (
    CameraMatrices,
    PinholeCamera,
    offaxis_stereo_camera,
    offaxis_stereo_transform,
    stereo_eyes,
)
from .raygen import (
    Strategy,
    compare_ray_batches,
    generate_rays,
    offaxis_stereo_camera_from_xfm,
)
from .render import Image, build_scene, render_stereo_pair, write_ppm_set

app = typer.Typer(
    name="caveray",
    help="caveray - Projection stéréo hors-axe pour le lancer de rayons en CAVE",
    add_completion=False,
)
console = Console(stderr=True)

EXIT_OK = 0
EXIT_COMPARE_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3

ANGLE_THRESHOLD = 1e-5
DISTANCE_THRESHOLD = 1e-5
CORRUPTION_OFFSET = 0.05


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Journalisation détaillée")):
    """Configure la journalisation."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def _load(config: str, **overrides) -> RunConfig:
    try:
        return load_config(config).with_overrides(**overrides)
    except FileNotFoundError as e:
        console.print(f"[red]{e}[/red]")
    except OSError as e:
        console.print(f"[red]Lecture de la configuration impossible: {e}[/red]")
        raise typer.Exit(code=EXIT_IO) from e
    except ConfigError as e:
        console.print(f"[red]Configuration invalide: {e}[/red]")
    raise typer.Exit(code=EXIT_CONFIG)


def _fmt(value) -> str:
    if isinstance(value, float | np.floating):
        return f"{float(value):.9g}"
    return " ".join(f"{float(v):.9g}" for v in np.ravel(value))


def _report(key: str, value) -> None:
    typer.echo(f"{key} = {_fmt(value) if not isinstance(value, str) else value}")


def _eyes(run: RunConfig):
    return zip(("left", "right"), stereo_eyes(run.rig))


# =============================================================================
# render
# =============================================================================


def output_paths(run: RunConfig, screen_name: str, strategy: Strategy) -> dict[str, Path]:
    """Chemins ``<prefix>[_<écran>][_s<n>]_{left,right,sbs}.ppm``."""
    stem = run.output
    if len(run.screens) > 1:
        stem += f"_{screen_name}"
    if run.strategy == "all":
        stem += f"_s{int(strategy)}"
    return {side: Path(f"{stem}_{side}.ppm") for side in ("left", "right", "sbs")}


@app.command()
def render(
    config: str = typer.Option("default", "--config", "-c", help="Configuration YAML"),
    strategy: str = typer.Option(None, "--strategy", "-s", help="Stratégie 1|2|3|all"),
    width: int = typer.Option(None, "--width", help="Largeur par œil (pixels)"),
    height: int = typer.Option(None, "--height", help="Hauteur (pixels)"),
    out: str = typer.Option(None, "--out", "-o", help="Préfixe des fichiers PPM"),
    scene: str = typer.Option(None, "--scene", help="Scène intégrée"),
):
    """Rend les paires stéréo en PPM (gauche, droite, côte à côte)."""
    run = _load(config, strategy=strategy, width=width, height=height, output=out, scene=scene)
    world = build_scene(run.scene, run.screens[0])

    images: dict[Path, Image] = {}
    try:
        for screen in run.screens:
            for strat in run.strategies:
                pair = render_stereo_pair(
                    world, screen, run.rig, strat, run.grid, run.znear, run.zfar, run.depth_clip
                )
                views = {"left": pair.left, "right": pair.right, "sbs": pair.side_by_side}
                for side, path in output_paths(run, screen.name, strat).items():
                    images[path] = views[side]
    except GeometryError as e:
        console.print(f"[red]Erreur géométrique: {e}[/red]")
        raise typer.Exit(code=EXIT_CONFIG)

    try:
        written = write_ppm_set(images)
    except OSError as e:
        console.print(f"[red]Erreur d'écriture: {e}[/red]")
        raise typer.Exit(code=EXIT_IO)

    for path in written:
        console.print(f"[green]Écrit[/green] {path}")


# =============================================================================
# compare
# =============================================================================


def corrupt_view(cams: CameraMatrices, offset: float = CORRUPTION_OFFSET) -> CameraMatrices:
    """Décale la matrice de vue (contrôle négatif de ``compare``)."""
    view = cams.view.copy()
    view[0, 3] += offset
    return CameraMatrices.from_matrices(cams.proj, view)


@app.command()
def compare(
    config: str = typer.Option("default", "--config", "-c", help="Configuration YAML"),
    width: int = typer.Option(None, "--width", help="Largeur de la grille"),
    height: int = typer.Option(None, "--height", help="Hauteur de la grille"),
    corrupt: bool = typer.Option(False, "--corrupt-view", hidden=True),
):
    """Compare les trois stratégies pixel à pixel (oracles mutuels)."""
    run = _load(config, width=width, height=height)
    grid = run.grid

    table = Table(title="Écarts entre stratégies")
    table.add_column("Écran / œil", style="cyan")
    table.add_column("Paire")
    table.add_column("Angle max (rad)", justify="right")
    table.add_column("Distance max (m)", justify="right")

    passed = True
    _report("pixels", str(grid.size))
    _report("threshold.angle_rad", ANGLE_THRESHOLD)
    _report("threshold.distance_m", DISTANCE_THRESHOLD)
    try:
        for screen in run.screens:
            for side, eye in _eyes(run):
                cams = offaxis_stereo_transform(screen, eye, run.znear, run.zfar)
                if corrupt:
                    cams = corrupt_view(cams)
                batches = {
                    Strategy.MATRICES: generate_rays(Strategy.MATRICES, cams, grid),
                    Strategy.PINHOLE: generate_rays(
                        Strategy.PINHOLE, offaxis_stereo_camera(screen, eye), grid
                    ),
                    Strategy.RECONSTRUCTED: generate_rays(Strategy.RECONSTRUCTED, cams, grid),
                }
                for a, b in combinations(Strategy, 2):
                    deviation = compare_ray_batches(batches[a], batches[b])
                    ok = deviation.within(ANGLE_THRESHOLD, DISTANCE_THRESHOLD)
                    passed &= ok
                    key = f"{screen.name}.{side}.s{int(a)}_s{int(b)}"
                    _report(f"{key}.max_angle_rad", deviation.max_angle)
                    _report(f"{key}.max_origin_distance_m", deviation.max_origin_distance)
                    color = "green" if ok else "red"
                    table.add_row(
                        f"{screen.name} / {side}",
                        f"{int(a)}-{int(b)}",
                        f"[{color}]{deviation.max_angle:.2e}[/{color}]",
                        f"[{color}]{deviation.max_origin_distance:.2e}[/{color}]",
                    )
    except GeometryError as e:
        console.print(f"[red]Erreur géométrique: {e}[/red]")
        raise typer.Exit(code=EXIT_CONFIG)

    _report("result", "pass" if passed else "fail")
    console.print(table)
    if not passed:
        console.print("[red]Seuils dépassés[/red]")
        raise typer.Exit(code=EXIT_COMPARE_FAILED)


# =============================================================================
# derive
# =============================================================================


def _region(cam: PinholeCamera) -> np.ndarray:
    return np.array([*cam.image_region.min, *cam.image_region.max])


@app.command()
def derive(
    config: str = typer.Option("default", "--config", "-c", help="Configuration YAML"),
):
    """Affiche matrices, caméra sténopé et sa reconstruction depuis les matrices."""
    run = _load(config)
    try:
        for screen in run.screens:
            for side, eye in _eyes(run):
                key = f"{screen.name}.{side}"
                cams = offaxis_stereo_transform(screen, eye, run.znear, run.zfar)
                pinhole = offaxis_stereo_camera(screen, eye)
                rebuilt = offaxis_stereo_camera_from_xfm(cams)

                _report(f"{key}.eye", eye)
                _report(f"{key}.proj", np.array(to_column_major(cams.proj)))
                _report(f"{key}.view", np.array(to_column_major(cams.view)))
                for label, cam in (("pinhole", pinhole), ("reconstructed", rebuilt)):
                    _report(f"{key}.{label}.eye", cam.eye)
                    _report(f"{key}.{label}.direction", cam.direction)
                    _report(f"{key}.{label}.up", cam.up)
                    _report(f"{key}.{label}.fovy", cam.fovy)
                    _report(f"{key}.{label}.aspect", cam.aspect)
                    _report(f"{key}.{label}.image_region", _region(cam))

                _report(f"{key}.diff.eye", float(np.abs(rebuilt.eye - pinhole.eye).max()))
                _report(f"{key}.diff.direction", float(np.abs(rebuilt.direction - pinhole.direction).max()))
                _report(f"{key}.diff.up", float(np.abs(rebuilt.up - pinhole.up).max()))
                _report(f"{key}.diff.fovy", abs(rebuilt.fovy - pinhole.fovy))
                _report(f"{key}.diff.aspect", abs(rebuilt.aspect - pinhole.aspect))
                _report(f"{key}.diff.image_region", float(np.abs(_region(rebuilt) - _region(pinhole)).max()))
    except GeometryError as e:
        console.print(f"[red]Erreur géométrique: {e}[/red]")
        raise typer.Exit(code=EXIT_CONFIG)


@app.command()
def info():
    """Affiche les informations du projet."""
    from . import __version__

    console.print(f"[bold blue]caveray[/bold blue] v{__version__}")
    console.print("Projection stéréo hors-axe pour le lancer de rayons en CAVE")
    console.print()
    console.print("[dim]Commandes disponibles :[/dim]")
    console.print("  caveray render   - Rendre les paires stéréo (PPM)")
    console.print("  caveray compare  - Comparer les trois stratégies")
    console.print("  caveray derive   - Afficher les paramètres de caméra dérivés")


if __name__ == "__main__":
    app()
