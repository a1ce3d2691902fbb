import csv
import hashlib
import json

import pytest

from crackle.cli import main

HEAVY = ["--family", "heavy_polynomial", "--alpha", "3", "--dim", "1"]


def run(argv, capsys):
    code = main(argv)
    err = capsys.readouterr().err
    return code, (json.loads(err) if err.strip() else None)


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_solve_scaling_row(tmp_path, capsys):
    code, _ = run(["solve-scaling", *HEAVY, "--k", "2", "--n", "100", "--scale-C", "1", "--out", str(tmp_path)], capsys)
    assert code == 0
    row = _read_csv(tmp_path / "scaling.csv")[0]
    assert float(row["R_kn"]) == pytest.approx(6.30, abs=5e-3)
    raw = (tmp_path / "scaling.csv").read_bytes()
    assert b"\r" not in raw and raw.startswith(b"n,k,")


def test_manifest_lists_outputs(tmp_path, capsys):
    assert run(["sample", *HEAVY, "--n", "50", "--seed", "3", "--out", str(tmp_path)], capsys)[0] == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["version"]
    assert "wall_clock_seconds" in manifest
    names = {e["path"] for e in manifest["outputs"]}
    assert names == {"points.csv", "sample.json"}
    for e in manifest["outputs"]:
        assert hashlib.sha256((tmp_path / e["path"]).read_bytes()).hexdigest() == e["sha256"]


def test_same_command_twice_is_bitwise_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["sample", *HEAVY, "--n", "200", "--seed", "11", "--out", str(out)], capsys)[0] == 0
    for name in ("points.csv", "sample.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_replay_reproduces_outputs(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(["integrate-h", "--k", "3", "--dim", "2", "--mc-samples", "5000", "--seed", "2", "--out", "r"],
               capsys)[0] == 0
    before = (tmp_path / "r" / "integral.json").read_bytes()
    (tmp_path / "r" / "integral.json").unlink()
    assert run(["replay", "r/manifest.json"], capsys)[0] == 0
    assert (tmp_path / "r" / "integral.json").read_bytes() == before


def test_census_replications_zero_is_config_error(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("density.family = heavy_polynomial\ndensity.alpha = 2\nn.grid = [1000]\nreplications = 0\n")
    code, record = run(["census", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 3
    assert record["error"] == "ConfigError" and record["field"] == "replications" and record["line"] == 4


def test_census_outputs(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("density.family = heavy_polynomial\ndensity.alpha = 2\nn.grid = [1000]\n"
                   "replications = 4\nmc_samples = 2000\n")
    assert run(["census", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)[0] == 0
    rows = _read_csv(tmp_path / "o" / "counts.csv")
    assert list(rows[0]) == ["replication", "n", "k", "count", "R_kn", "seed"] and len(rows) == 4
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["config"]["replications"] == 4


@pytest.mark.parametrize("argv,code", [
    (["frobnicate"], 2),
    ([], 2),
    (["sample", *HEAVY, "--n", "5", "--bogus"], 2),
    (["sample", "--family", "heavy_polynomial", "--alpha", "0.5", "--n", "5"], 4),
    (["solve-scaling", "--family", "light_von_mises", "--tau", "1", "--n", "1.5", "--rn-scale", "0.001"], 5),
    (["census", "--config", "/nonexistent/file.cfg"], 3),
])
def test_exit_codes(argv, code, capsys, tmp_path):
    if argv and argv[0] != "frobnicate":
        argv = argv + ["--out", str(tmp_path)]
    got, record = run(argv, capsys)
    assert got == code
    assert record["exit_code"] == code and record["message"]


def test_betti_from_points_file(tmp_path, capsys):
    pts = tmp_path / "tri.csv"
    pts.write_text("x1,x2\n0,0\n0.9,0\n0.45,0.779422863\n")
    assert run(["betti", "--points", str(pts), "--r", "1.0", "--out", str(tmp_path / "o")], capsys)[0] == 0
    report = json.loads((tmp_path / "o" / "betti.json").read_text())
    assert report["betti"][:2] == [1, 1] and report["simplex_counts"] == [3, 3, 0]


def test_plot_data_format(tmp_path, capsys):
    cfg = tmp_path / "m.cfg"
    cfg.write_text("density.family = heavy_polynomial\ndensity.alpha = 2\nn.grid = [1000]\n"
                   "replications = 3\nmc_samples = 2000\n")
    assert run(["maxima", "--config", str(cfg), "--t-points", "5", "--out", str(tmp_path / "o")], capsys)[0] == 0
    rows = _read_csv(tmp_path / "o" / "maxima_paths.csv")
    assert list(rows[0]) == ["x", "y", "series"] and len(rows) == 15


def test_contractibility_and_sums_run(tmp_path, capsys):
    assert run(["contractibility", "--n", "1e4", "1e5", "--out", str(tmp_path / "c")], capsys)[0] == 0
    rows = _read_csv(tmp_path / "c" / "contractibility.csv")
    assert float(rows[0]["scaled_gap"]) > float(rows[1]["scaled_gap"]) > 0
    assert run(["sums", "--n", "1e4", "--reps", "3", "--n-terms", "100", "--out", str(tmp_path / "s")], capsys)[0] == 0
    assert run(["annuli", *HEAVY, "--n", "1e3", "--reps", "2", "--out", str(tmp_path / "a")], capsys)[0] == 0
    assert run(["palm-check", *HEAVY, "--n", "100", "--reps", "50", "--palm-samples", "2000",
                "--out", str(tmp_path / "p")], capsys)[0] == 0
