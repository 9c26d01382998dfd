import json
from pathlib import Path

import numpy as np
import pytest

from devsurf import io
from devsurf.cli import main
from devsurf.scenarios import cone_sector

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _files(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


@pytest.mark.parametrize("mode, expected", [
    ("analyze", {"curvature.csv", "curvature_summary.txt", "gauss_image.xyz",
                 "gauss_planes.csv", "surface.obj", "surface.json", "surface_control.obj"}),
    ("rulings", {"rulings.csv"}),
    ("fit", {"history.csv", "surface.obj", "gauss_image.xyz"}),
])
def test_modes_write_outputs(tmp_path, mode, expected):
    out = tmp_path / mode
    assert main([mode, "--scenario", "cone", "--out", str(out), "--iters", "3"]) == 0
    names = set(_files(out))
    assert expected <= names and "config.cfg" in names


def test_develop_is_deterministic(tmp_path):
    args = ["develop", "--scenario", "perturbed-cylinder", "--iters", "2", "--out"]
    assert main(args + [str(tmp_path / "a")]) == 0
    assert main(args + [str(tmp_path / "a2")]) == 0
    a, b = _files(tmp_path / "a"), _files(tmp_path / "a2")
    assert a.keys() == b.keys()
    for name in a:
        if name != "config.cfg":
            assert a[name] == b[name], name
    rows = io.read_history(tmp_path / "a" / "history.csv")
    assert len(rows) == 3 and rows[-1]["E_total"] < rows[0]["E_total"]


def test_surface_round_trip_through_cli(tmp_path):
    io.save_surface(cone_sector().model, tmp_path / "cone.json")
    assert main(["analyze", "--surface", str(tmp_path / "cone.json"),
                 "--out", str(tmp_path / "o")]) == 0
    summary = (tmp_path / "o" / "curvature_summary.txt").read_text()
    assert "max_abs" in summary


def test_overrides_are_echoed(tmp_path):
    out = tmp_path / "o"
    assert main(["develop", "--config", str(CONFIGS / "develop_cylinder.cfg"), "--wd", "7",
                 "--iters", "1", "--out", str(out)]) == 0
    text = (out / "config.cfg").read_text()
    assert "w_d = 7.0" in text and "max_iterations = 1" in text


def test_missing_config_exits_2(tmp_path, capsys):
    assert main(["develop", "--config", str(tmp_path / "none.cfg")]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_bad_panel_spec_exits_2(tmp_path, capsys):
    cfg = tmp_path / "p.cfg"
    cfg.write_text("scenario = torus-sector\npanels = 2 1\n[panels]\npanel 0 = free\n"
                   "panel 1 = cone:120\n")
    assert main(["panelize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "panel 1" in capsys.readouterr().err


def test_negative_weight_exits_2(tmp_path):
    assert main(["develop", "--scenario", "cone", "--wd", "-1", "--out", str(tmp_path)]) == 2


def test_malformed_reference_exits_2(tmp_path):
    (tmp_path / "r.xyz").write_text("1 2 3\n")
    assert main(["fit", "--reference", str(tmp_path / "r.xyz"), "--out",
                 str(tmp_path / "o")]) == 2


def test_non_finite_surface_exits_2(tmp_path):
    io.save_surface(cone_sector().model, tmp_path / "s.json")
    data = json.loads((tmp_path / "s.json").read_text())
    data["control_points"][1][1][0] = float("nan")
    (tmp_path / "s.json").write_text(json.dumps(data))
    assert main(["develop", "--surface", str(tmp_path / "s.json"),
                 "--out", str(tmp_path / "o")]) == 2


def test_degenerate_surface_exits_1(tmp_path, capsys):
    model = cone_sector().model
    pts = model.points.copy()
    pts[:, :] = pts[:1, :1]  # every control point at one location
    io.save_surface(model.copy(pts.reshape(-1, 3)), tmp_path / "s.json")
    assert main(["develop", "--surface", str(tmp_path / "s.json"),
                 "--out", str(tmp_path / "o")]) == 1
    assert "numerical failure" in capsys.readouterr().err
