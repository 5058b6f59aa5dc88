"""CSV and SVG output of trajectories."""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from jinja2 import Environment, FileSystemLoader, StrictUndefined, select_autoescape

from app.config import settings
from app.services.geodesic_field import Trajectory
from app.utils.paths import CSV_EXTENSIONS, SVG_EXTENSIONS, resolve_output_path

logger = logging.getLogger(__name__)

SVG_TEMPLATE = "trajectory.svg.j2"
PIECE_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
REFERENCE_COLOR = "#7f7f7f"
EVENT_COLOR = "#000000"

_environment: Optional[Environment] = None


def get_environment() -> Environment:
    """Jinja2 environment over ``settings.templates_path``, built once."""
    global _environment
    if _environment is None:
        _environment = Environment(
            loader=FileSystemLoader(settings.templates_path),
            autoescape=select_autoescape(["svg", "j2"]),
            undefined=StrictUndefined,
            trim_blocks=True,
            lstrip_blocks=True,
        )
    return _environment


def _fmt(value: float) -> str:
    return repr(float(value))


def write_trajectory_csv(traj: Trajectory, path: str) -> Path:
    """Write ``t,x1..xn,a1..an,control,H`` rows and a ``<stem>.events.csv`` side file.

    Floats are written with ``repr`` so equal trajectories give identical files.

    Returns:
        Path of the main CSV file
    """
    target = resolve_output_path(path, CSV_EXTENSIONS)
    dim = traj.pieces[0].xs.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(dim)] + [f"a{i + 1}" for i in range(dim)] + ["control", "H"]

    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for piece in traj.pieces:
            for t, x, a, h in zip(piece.times, piece.xs, piece.alphas, piece.hamiltonian):
                writer.writerow([_fmt(t), *map(_fmt, x), *map(_fmt, a), piece.control, _fmt(h)])

    events_path = target.with_name(f"{target.stem}.events.csv")
    with events_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["t", "kind", "from_control", "to_control"])
        for event in traj.events:
            writer.writerow([_fmt(event.t), event.kind, event.from_control or "", event.to_control or ""])

    logger.info(f"Wrote {sum(p.times.shape[0] for p in traj.pieces)} samples to {target}")
    return target


@dataclass
class _Projector:
    """Maps chart coordinates to SVG pixels, x2 pointing up."""

    lower: np.ndarray
    upper: np.ndarray
    width: int
    height: int
    pad: int = 24

    @classmethod
    def fit(cls, clouds: Sequence[np.ndarray], width: int, height: int) -> "_Projector":
        stacked = np.vstack([c[:, :2] for c in clouds if c.size])
        lower, upper = stacked.min(axis=0), stacked.max(axis=0)
        span = np.maximum(upper - lower, 1e-9)
        return cls(lower=lower - 0.05 * span, upper=upper + 0.05 * span, width=width, height=height)

    @property
    def scale(self) -> float:
        span = self.upper - self.lower
        return min((self.width - 2 * self.pad) / span[0], (self.height - 2 * self.pad) / span[1])

    def __call__(self, points: np.ndarray) -> np.ndarray:
        px = self.pad + (points[:, 0] - self.lower[0]) * self.scale
        py = self.height - self.pad - (points[:, 1] - self.lower[1]) * self.scale
        return np.column_stack([px, py])

    def points_attr(self, points: np.ndarray) -> str:
        return " ".join(f"{u:.2f},{v:.2f}" for u, v in self(points))


def render_svg(
    curves: Sequence[Tuple[str, np.ndarray]],
    references: Sequence[Tuple[str, np.ndarray]] = (),
    markers: Sequence[Tuple[str, Sequence[float]]] = (),
    title: str = "",
    width: int = 640,
    height: int = 480,
    show_axis: bool = False,
) -> str:
    """Render labelled polylines, dashed reference polylines and point markers.

    Only the first two coordinates of every point are drawn.
    """
    clouds = [np.asarray(c, dtype=float) for _, c in list(curves) + list(references)]
    clouds += [np.atleast_2d(np.asarray(p, dtype=float)) for _, p in markers]
    project = _Projector.fit(clouds, width, height)

    axis_y = None
    if show_axis and project.lower[1] <= 0.0 <= project.upper[1]:
        axis_y = float(project(np.array([[0.0, 0.0]]))[0, 1])

    context: Dict[str, object] = {
        "width": width,
        "height": height,
        "title": title,
        "axis_y": axis_y,
        "polylines": [
            {"label": label, "points": project.points_attr(np.asarray(pts, dtype=float)),
             "color": PIECE_COLORS[i % len(PIECE_COLORS)]}
            for i, (label, pts) in enumerate(curves)
        ],
        "references": [
            {"label": label, "points": project.points_attr(np.asarray(pts, dtype=float)), "color": REFERENCE_COLOR}
            for label, pts in references
        ],
        "markers": [],
    }
    for label, point in markers:
        cx, cy = project(np.atleast_2d(np.asarray(point, dtype=float)))[0]
        context["markers"].append({"label": label, "cx": f"{cx:.2f}", "cy": f"{cy:.2f}", "color": EVENT_COLOR})

    return get_environment().get_template(SVG_TEMPLATE).render(**context)


def trajectory_markers(traj: Trajectory) -> List[Tuple[str, np.ndarray]]:
    """Switch-event positions, taken from the first sample of the following piece."""
    markers = []
    for piece in traj.pieces[1:]:
        markers.append((f"switch to {piece.control} at t={piece.t_a:.6g}", piece.xs[0]))
    return markers


def write_trajectory_svg(
    traj: Trajectory,
    path: str,
    references: Sequence[Tuple[str, np.ndarray]] = (),
    title: Optional[str] = None,
) -> Path:
    """Draw the projected trajectory, one colour per piece, with switch markers."""
    target = resolve_output_path(path, SVG_EXTENSIONS)
    curves = [(piece.control, piece.xs) for piece in traj.pieces]
    svg = render_svg(
        curves,
        references=references,
        markers=trajectory_markers(traj),
        title=title or f"{traj.kind} trajectory, C0={traj.c0:.6g}",
        show_axis=True,
    )
    target.write_text(svg, encoding="utf-8")
    logger.info(f"Wrote SVG with {len(curves)} pieces to {target}")
    return target
