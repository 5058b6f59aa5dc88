"""``figures``: redraw the half-hexagon and typical S_e path figures."""
import logging

import numpy as np

from app.models.schemas import RunConfig
from app.services.definitions import DefinitionRegistry
from app.services.export import render_svg, trajectory_markers
from app.services.qh_plane import connect_hexagon, hexagon_trace, se_geodesic
from app.utils.paths import resolve_output_dir

logger = logging.getLogger(__name__)

HALF_HEXAGON_ENDPOINTS = ((-1.0, 1.0), (1.0, 1.0))
SE_TYPICAL_STATE = ((0.0, 1.0), (1.0, 3.0))
SE_TYPICAL_SPAN = (0.0, 6.0)


def register(subparsers) -> None:
    parser = subparsers.add_parser("figures", help="Write the half-hexagon and S_e path figures as SVG")
    parser.add_argument("--out-dir", dest="out_dir", help="Directory for the SVG files (default: settings.output_path)")


def half_hexagon_svg() -> str:
    p, q = HALF_HEXAGON_ENDPOINTS
    traj = connect_hexagon(p, q)
    start = traj.initial_state()
    trace = hexagon_trace(start.x, start.alpha)
    outline = np.vstack([trace.vertices, trace.vertices[:1]])
    return render_svg(
        [(piece.control, piece.xs) for piece in traj.pieces],
        references=[("full hexagon", outline)],
        markers=[("p", p), ("q", q)] + trajectory_markers(traj),
        title=f"Half hexagon from {p} to {q}, length {traj.length:.6f}",
        show_axis=True,
    )


def se_path_svg() -> str:
    x0, alpha0 = SE_TYPICAL_STATE
    traj = se_geodesic(x0, alpha0, SE_TYPICAL_SPAN)
    return render_svg(
        [(piece.control, piece.xs) for piece in traj.pieces],
        markers=trajectory_markers(traj),
        title=f"S_e geodesic from x0={x0}, alpha0={alpha0}",
    )


def run(config: RunConfig, registry: DefinitionRegistry) -> int:
    directory = resolve_output_dir(config.out_dir)
    for name, render in (("half_hexagon.svg", half_hexagon_svg), ("se_typical_path.svg", se_path_svg)):
        path = directory / name
        path.write_text(render(), encoding="utf-8")
        logger.info(f"Wrote figure {path}")
        print(path)
    return 0
