"""SVG rendering of foraging trajectories.

The image is a pure function of the trajectory CSV plus its `.meta.json`
sidecar (arena size, food positions, eaten steps). Without a sidecar the
trajectory is drawn alone on a default-sized arena.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

# Dark blue (start) through teal/green to yellow (end).
_COLOR_ANCHORS = (
    (68, 1, 84),
    (59, 82, 139),
    (33, 145, 140),
    (94, 201, 98),
    (253, 231, 37),
)
_DEFAULT_WIDTH = 1600.0
_DEFAULT_HEIGHT = 1200.0
_FOOD_COLOR = "#d62728"


def time_color(frac: float) -> str:
    """Hex color for a time fraction in [0, 1], dark blue at 0, yellow at 1."""
    frac = min(1.0, max(0.0, frac))
    spans = len(_COLOR_ANCHORS) - 1
    pos = frac * spans
    k = min(int(pos), spans - 1)
    t = pos - k
    lo, hi = _COLOR_ANCHORS[k], _COLOR_ANCHORS[k + 1]
    rgb = tuple(round(lo[c] + (hi[c] - lo[c]) * t) for c in range(3))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _read_points(csv_path: Path) -> list[tuple[float, float]]:
    points = []
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["t", "x", "y"]:
            raise ValueError(f"{csv_path}: not a trajectory file (header {header})")
        for row in reader:
            points.append((float(row[1]), float(row[2])))
    return points


def render_trajectory(
    csv_path: str | Path,
    out_path: str | Path | None = None,
    meta_path: str | Path | None = None,
) -> Path:
    """Write a time-colored SVG next to the trajectory CSV; returns its path.

    An empty trajectory is an error and no output file is created.
    """
    csv_path = Path(csv_path)
    points = _read_points(csv_path)
    if not points:
        raise ValueError(f"{csv_path}: empty trajectory")
    if len(points) < 2:
        raise ValueError(f"{csv_path}: trajectory has no segments")

    meta_path = csv_path.with_suffix(".meta.json") if meta_path is None else Path(meta_path)
    meta = None
    if meta_path.exists():
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    width = float(meta["width"]) if meta else _DEFAULT_WIDTH
    height = float(meta["height"]) if meta else _DEFAULT_HEIGHT

    def sy(y: float) -> float:  # worm y points up; SVG y points down
        return height - y

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width!r} {height!r}" '
        f'width="{width!r}" height="{height!r}">',
        f'<rect id="arena" x="0" y="0" width="{width!r}" height="{height!r}" '
        f'fill="white" stroke="black" stroke-width="4"/>',
    ]

    if meta is not None:
        radius = float(meta.get("consumption_range", 20.0))
        parts.append('<g id="food">')
        for food in meta.get("food", []):
            cx, cy = float(food["x"]), sy(float(food["y"]))
            eaten = int(food.get("eaten_step", -1)) >= 0
            style = (
                f'fill="none" stroke="{_FOOD_COLOR}" stroke-width="3"'
                if eaten
                else f'fill="{_FOOD_COLOR}"'
            )
            parts.append(
                f'<circle data-food-id="{food["food_id"]}" data-eaten-step="{food.get("eaten_step", -1)}" '
                f'cx="{cx!r}" cy="{cy!r}" r="{radius!r}" {style}/>'
            )
        parts.append("</g>")

    parts.append('<g id="trajectory" stroke-width="5" stroke-linecap="round" fill="none">')
    segments = len(points) - 1
    for i in range(segments):
        (x1, y1), (x2, y2) = points[i], points[i + 1]
        color = time_color(i / (segments - 1) if segments > 1 else 0.0)
        parts.append(
            f'<line x1="{x1!r}" y1="{sy(y1)!r}" x2="{x2!r}" y2="{sy(y2)!r}" stroke="{color}"/>'
        )
    parts.append("</g>")
    x0, y0 = points[0]
    parts.append(
        f'<circle id="start" cx="{x0!r}" cy="{sy(y0)!r}" r="8" fill="{time_color(0.0)}"/>'
    )
    parts.append("</svg>")

    out_path = csv_path.with_suffix(".svg") if out_path is None else Path(out_path)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
    return out_path
