import csv

import numpy as np
import pytest

from app.errors import ConfigError
from app.services.definitions import resolve_field
from app.services.export import render_svg, write_trajectory_csv, write_trajectory_svg
from app.services.geodesic_field import CotangentState, integrate_extended
from app.services.qh_plane import SQRT3


@pytest.fixture
def hexagon_traj():
    field = resolve_field("qh_hexagon")
    return integrate_extended(field, CotangentState.of((0.0, 1.0), (1.0, SQRT3)), (0.0, 3.0), step=1e-2)


def test_csv_columns_and_events(hexagon_traj, output_dir):
    path = write_trajectory_csv(hexagon_traj, "hexagon.csv")
    assert path == output_dir / "hexagon.csv"
    with path.open(encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["t", "x1", "x2", "a1", "a2", "control", "H"]
    assert rows[1][5] == "vertex:1"
    assert float(rows[1][0]) == 0.0
    assert rows[-1][5] == hexagon_traj.pieces[-1].control

    events = (output_dir / "hexagon.events.csv").read_text(encoding="utf-8").splitlines()
    assert events[0] == "t,kind,from_control,to_control"
    assert len(events) == 1 + len(hexagon_traj.events)
    assert events[1].split(",")[1:] == ["switch", "vertex:1", "vertex:0"]


def test_csv_is_deterministic(hexagon_traj, output_dir):
    first = write_trajectory_csv(hexagon_traj, "a.csv").read_bytes()
    second = write_trajectory_csv(hexagon_traj, "b.csv").read_bytes()
    assert first == second


def test_svg_has_one_polyline_per_piece(hexagon_traj, output_dir):
    path = write_trajectory_svg(hexagon_traj, "hexagon.svg")
    svg = path.read_text(encoding="utf-8")
    assert svg.lstrip().startswith("<svg") or svg.lstrip().startswith("<?xml")
    assert svg.count("<polyline") >= len(hexagon_traj.pieces)
    assert "vertex:0" in svg


def test_render_svg_escapes_labels():
    svg = render_svg([("a<b", np.array([[0.0, 1.0], [1.0, 2.0]]))], title="x & y")
    assert "a&lt;b" in svg
    assert "x &amp; y" in svg


def test_wrong_extension(hexagon_traj, output_dir):
    with pytest.raises(ConfigError):
        write_trajectory_csv(hexagon_traj, "hexagon.txt")
    with pytest.raises(ConfigError):
        write_trajectory_svg(hexagon_traj, "hexagon.csv")
