import json
import math

import pytest

from fplab.cli import SCHEMAS, SUBCOMMANDS, main


def read(path):
    return path.read_bytes()


def test_every_subcommand_has_a_schema():
    assert set(SCHEMAS) == set(SUBCOMMANDS)


def test_calibrate_p2(tmp_path, capsys):
    code = main(["calibrate-cone", "--dim", "2", "--p", "2", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "aperture=%.17g" % (math.pi / 2) in out
    d = tmp_path / "calibrate-cone" / "default"
    header = (d / "results.csv").read_text().splitlines()[0]
    assert header == "N,p,aperture,cap_measure,residual"
    verdicts = json.loads((d / "verdicts.json").read_text())
    assert all(set(v) >= {"name", "pass", "status"} for v in verdicts)
    manifest = json.loads((d / "manifest.json").read_text())
    assert manifest["seed"] == 0 and "versions" in manifest


def test_malformed_config(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"domain": {"name": "ball", "radius": -1}, "datum": {"name": "affine"}}))
    assert main(["solve-dpp", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "domain/radius" in capsys.readouterr().err
    cfg.write_text("{not json")
    assert main(["solve-dpp", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert main(["verify-expansion", "--eps-list", "0.1,x", "--out", str(tmp_path)]) == 1


def test_missing_required_field(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"datum": {"name": "constant"}}))
    assert main(["play-game", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "domain" in capsys.readouterr().err


def test_play_game_bytes_are_reproducible(tmp_path):
    cfg = tmp_path / "g.json"
    cfg.write_text(json.dumps({
        "domain": {"name": "ball", "radius": 1.0},
        "datum": {"name": "affine", "b": [1.0, 0.0], "clip": 2.0},
        "eps": 0.25, "episodes": 300, "starts": [[0.2, 0.0]],
        "strategies": [{"name": "pull"}, {"name": "push"}]}))
    outs = []
    for label in ("a", "b"):
        code = main(["play-game", "--config", str(cfg), "--seed", "42", "--out", str(tmp_path),
                     "--label", label, "--workers", "1"])
        assert code == 0
        d = tmp_path / "play-game" / label
        outs.append((read(d / "results.csv"), read(d / "verdicts.json")))
    assert outs[0] == outs[1]
    row = outs[0][0].decode().splitlines()[1].split(",")
    assert len(row[2].replace("-", "").replace(".", "").lstrip("0")) >= 15


def test_inconclusive_exit_code(tmp_path):
    code = main(["exit-bounds", "--episodes", "200", "--out", str(tmp_path), "--workers", "1"])
    assert code == 2
    v = json.loads((tmp_path / "exit-bounds" / "default" / "verdicts.json").read_text())
    assert v[0]["status"] == "inconclusive"


def test_solve_dpp_small(tmp_path):
    cfg = tmp_path / "d.json"
    cfg.write_text(json.dumps({"domain": {"name": "ball"}, "datum": {"name": "affine", "clip": 2.0},
                               "eps": 0.25, "h": 0.0625, "restart": True}))
    assert main(["solve-dpp", "--config", str(cfg), "--out", str(tmp_path)]) == 0


def test_verify_measure(tmp_path):
    assert main(["verify-measure", "--out", str(tmp_path)]) == 0


def test_dump_quadrature(tmp_path):
    assert main(["dump-quadrature", "--dim", "3", "--p", "3", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "dump-quadrature" / "default" / "results.csv").read_text().splitlines()
    assert lines[0] == "z1,z2,z3,weight" and len(lines) > 100
