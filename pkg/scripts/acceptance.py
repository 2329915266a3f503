#!/usr/bin/env python3
"""
Campagne d'acceptation caveray sur configurations randomisées.

Vérifie, pour chaque configuration tirée :
- l'équivalence des rayons entre les trois stratégies ;
- la reconstruction de l'œil par la stratégie 3 ;
- l'épinglage des coins de l'écran en NDC.

Usage:
    python scripts/acceptance.py
    python scripts/acceptance.py --count 20 --grid 32 --seed 7
"""

import argparse
import json
import sys
import time
from datetime import datetime
from pathlib import Path

import numpy as np
from rich.console import Console
from rich.progress import track
from rich.table import Table

PROJECT_ROOT = Path(__file__).parent.parent
REPORTS_DIR = PROJECT_ROOT / "reports"

# Add app to path for imports
sys.path.insert(0, str(PROJECT_ROOT))

from app.geom import project  # noqa: E402
from app.offaxis import offaxis_stereo_camera, offaxis_stereo_transform  # noqa: E402
from app.raygen import (  # noqa: E402
    PixelGrid,
    Strategy,
    compare_ray_batches,
    generate_rays,
    offaxis_stereo_camera_from_xfm,
)
from app.sampling import random_configuration  # noqa: E402

console = Console()

ANGLE_THRESHOLD = 1e-5
DISTANCE_THRESHOLD = 1e-5
EYE_RECOVERY_RATIO = 1e-4
CORNER_THRESHOLD = 1e-5
NDC_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def evaluate_configuration(screen, eye, grid: PixelGrid) -> dict:
    """Mesure les trois critères sur une configuration."""
    cams = offaxis_stereo_transform(screen, eye)
    pinhole = offaxis_stereo_camera(screen, eye)

    batches = {
        Strategy.MATRICES: generate_rays(Strategy.MATRICES, cams, grid),
        Strategy.PINHOLE: generate_rays(Strategy.PINHOLE, pinhole, grid),
        Strategy.RECONSTRUCTED: generate_rays(Strategy.RECONSTRUCTED, cams, grid),
    }
    deviations = [
        compare_ray_batches(batches[a], batches[b])
        for a, b in ((1, 2), (1, 3), (2, 3))
    ]

    recovered = offaxis_stereo_camera_from_xfm(cams).eye
    eye_error = float(np.linalg.norm(recovered - eye))

    ndc = project(cams.proj, cams.view, np.stack(screen.corners()))
    corner_error = float(np.abs(ndc[:, :2] - NDC_CORNERS).max())

    return {
        "width": screen.width,
        "height": screen.height,
        "max_angle_rad": max(d.max_angle for d in deviations),
        "max_origin_distance_m": max(d.max_origin_distance for d in deviations),
        "eye_error_m": eye_error,
        "eye_error_ratio": eye_error / screen.diagonal,
        "corner_error_ndc": corner_error,
    }


def check(result: dict) -> dict[str, bool]:
    return {
        "equivalence": result["max_angle_rad"] < ANGLE_THRESHOLD
        and result["max_origin_distance_m"] < DISTANCE_THRESHOLD,
        "eye_recovery": result["eye_error_ratio"] < EYE_RECOVERY_RATIO,
        "corner_pinning": result["corner_error_ndc"] < CORNER_THRESHOLD,
    }


def print_summary(results: list[dict], elapsed: float):
    """Affiche un résumé des critères."""
    table = Table(title="Acceptation caveray")
    table.add_column("Critère", style="cyan")
    table.add_column("OK", justify="right")
    table.add_column("Pire valeur", justify="right")

    worst = {
        "equivalence": max(r["max_angle_rad"] for r in results),
        "eye_recovery": max(r["eye_error_ratio"] for r in results),
        "corner_pinning": max(r["corner_error_ndc"] for r in results),
    }
    for criterion, value in worst.items():
        passed = sum(1 for r in results if r["checks"][criterion])
        color = "green" if passed == len(results) else "red"
        table.add_row(criterion, f"[{color}]{passed}/{len(results)}[/{color}]", f"{value:.2e}")

    console.print(table)
    console.print(f"Durée: {elapsed:.2f} s")


def save_results(results: list[dict], args, elapsed: float, output_path: Path):
    """Sauvegarde les résultats avec métadonnées pour reproductibilité."""
    output_data = {
        "timestamp": datetime.now().isoformat(),
        "seed": args.seed,
        "count": args.count,
        "grid": args.grid,
        "elapsed_s": elapsed,
        "thresholds": {
            "angle_rad": ANGLE_THRESHOLD,
            "distance_m": DISTANCE_THRESHOLD,
            "eye_recovery_ratio": EYE_RECOVERY_RATIO,
            "corner_ndc": CORNER_THRESHOLD,
        },
        "results": results,
    }

    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, "w", encoding="utf-8") as f:
        json.dump(output_data, f, ensure_ascii=False, indent=2)

    console.print(f"\n[green]Résultats: {output_path}[/green]")


def main():
    """Point d'entrée."""
    parser = argparse.ArgumentParser(description="Acceptation caveray")
    parser.add_argument("--count", type=int, default=100, help="Nombre de configurations")
    parser.add_argument("--grid", type=int, default=64, help="Taille de la grille (pixels)")
    parser.add_argument("--seed", type=int, default=42, help="Graine aléatoire")
    parser.add_argument("--output", type=str, default=None, help="Fichier de sortie")
    args = parser.parse_args()

    console.print("[bold blue]Acceptation caveray[/bold blue]\n")
    console.print(f"Configurations: {args.count}, grille {args.grid}x{args.grid}\n")

    rng = np.random.default_rng(args.seed)
    grid = PixelGrid(args.grid, args.grid)

    start = time.perf_counter()
    results = []
    for index in track(range(args.count), description="Évaluation..."):
        screen, eye = random_configuration(rng)
        result = evaluate_configuration(screen, eye, grid)
        result["index"] = index
        result["checks"] = check(result)
        results.append(result)
    elapsed = time.perf_counter() - start

    print_summary(results, elapsed)

    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    output_file = Path(args.output) if args.output else REPORTS_DIR / f"acceptance_{timestamp}.json"
    save_results(results, args, elapsed, output_file)

    if not all(all(r["checks"].values()) for r in results):
        sys.exit(1)


if __name__ == "__main__":
    main()
