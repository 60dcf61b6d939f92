"""Shared helpers for the demo scripts: a headless backend and the figure folder."""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

FIGURES = Path(__file__).resolve().parent / "figures"
FIGURES.mkdir(exist_ok=True)


def save(fig, name):
    path = FIGURES / name
    fig.savefig(path, dpi=120, bbox_inches="tight")
    print(f"wrote {path}")
