import json
import os

import pytest

from app.config import settings
from app.main import main

SAMPLE_DEFINITIONS = os.path.join(settings.data_path, "definitions.json")


def test_norm_eval(capsys):
    assert main(["norm", "--norm", "euclidean", "--query", "eval", "--argument", "3,4"]) == 0
    assert capsys.readouterr().out.strip() == "5.0"


def test_norm_support_face(capsys):
    assert main(["norm", "--norm", "hexagon", "--query", "support", "--argument", "1,0"]) == 0
    lines = capsys.readouterr().out.split()
    assert lines[0] == "face"
    assert len(lines) == 3


def test_norm_preferred_directions(capsys):
    assert main(["norm", "--norm", "hexagon", "--query", "preferred"]) == 0
    rows = [[float(v) for v in line.split(",")] for line in capsys.readouterr().out.split()]
    assert len(rows) == 6
    assert [0.0, 1.0] in rows

    assert main(["norm", "--norm", "se", "--query", "preferred"]) == 0
    assert len(capsys.readouterr().out.split()) == 4

    assert main(["norm", "--norm", "euclidean", "--query", "preferred"]) == 0
    assert capsys.readouterr().out.strip() == ""


def test_missing_command_prints_help(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_missing_option(capsys):
    assert main(["norm", "--norm", "hexagon"]) == 2
    assert "--query" in capsys.readouterr().err


def test_unknown_field(capsys):
    assert main(["integrate", "--field", "qh_dodecagon", "--x0", "0,1", "--alpha0", "1,0"]) == 2
    assert "Unknown field" in capsys.readouterr().err


def test_invalid_step_is_a_config_error(capsys):
    assert main(["integrate", "--field", "qh_euclidean", "--x0", "0,1", "--alpha0", "1,0", "--step=-0.1"]) == 2
    assert "step" in capsys.readouterr().err


def test_integrate_writes_csv(capsys, output_dir):
    code = main(["integrate", "--field", "qh_hexagon", "--x0", "0,1", "--alpha0", "1,1.732",
                 "--t1", "3", "--step", "0.01", "--out-csv", "hexagon.csv"])
    assert code == 0
    assert (output_dir / "hexagon.csv").is_file()
    assert (output_dir / "hexagon.events.csv").is_file()
    assert '"kind": "extended"' in capsys.readouterr().out


def test_domain_exit_returns_three(capsys):
    code = main(["--definitions", SAMPLE_DEFINITIONS, "integrate", "--field", "boxed_triangle",
                 "--x0", "0,0", "--alpha0", "1,0", "--t1", "10", "--step", "0.01"])
    assert code == 3
    assert "left the domain" in capsys.readouterr().err


def test_config_file_with_flag_override(tmp_path, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"command": "norm", "norm": "euclidean", "query": "eval", "argument": [1, 0]}))
    assert main(["--config", str(config), "norm", "--argument", "0,2"]) == 0
    assert capsys.readouterr().out.strip() == "2.0"


def test_config_file_rejects_unknown_keys(tmp_path, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"command": "norm", "colour": "red"}))
    assert main(["--config", str(config)]) == 2
    assert "colour" in capsys.readouterr().err


def test_verify_list(capsys):
    assert main(["verify", "--list"]) == 0
    assert "oracle-hexagon" in capsys.readouterr().out


def test_verify_scenario(capsys):
    assert main(["verify", "--scenario", "lipschitz"]) == 0
    assert '"passed": true' in capsys.readouterr().out


def test_verify_unknown_scenario():
    assert main(["verify", "--scenario", "fermat"]) == 2


def test_coarse_certificate_fails_with_four(capsys):
    code = main(["certify", "--field", "qh_hexagon", "--p=-1,1", "--q=1,1", "--grid-n", "9", "--stencil", "4"])
    assert code == 4
    assert "Oracle gap" in capsys.readouterr().err


def test_certify_needs_a_solver():
    assert main(["certify", "--field", "qh_se", "--p=0,1", "--q=1,1"]) == 2


def test_figures(tmp_path, capsys):
    assert main(["figures", "--out-dir", str(tmp_path)]) == 0
    written = sorted(p.name for p in tmp_path.glob("*.svg"))
    assert written == ["half_hexagon.svg", "se_typical_path.svg"]
    assert "<polyline" in (tmp_path / "half_hexagon.svg").read_text(encoding="utf-8")


def test_certify_window_must_hold_both_points(capsys):
    code = main(["certify", "--field", "qh_hexagon", "--p=-1,1", "--q=1,1", "--window=-2,0.5,0,2", "--grid-n", "9"])
    assert code == 3
    assert "outside the oracle window" in capsys.readouterr().err


def test_certify_rejects_empty_window():
    assert main(["certify", "--field", "qh_hexagon", "--p=-1,1", "--q=1,1", "--window=0,1,0,2"]) == 2
