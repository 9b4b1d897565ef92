import csv
import json
import math

import numpy as np
import pytest

from dampqfi.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, main
from dampqfi.config import build_run_config
from dampqfi.errors import ConfigError

SMALL_GRID = '{"u1": [0, 0.99, 12], "u2": [0, 0.99, 12], "alpha2": [0.2, 0.2, 1]}'


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, *args):
    return main([*args, "--out_dir", str(tmp_path)])


def test_config_layering(tmp_path):
    doc = tmp_path / "c.json"
    doc.write_text(json.dumps({"u1": 0.2, "dim": 12}))
    cfg = build_run_config("evolve", json.loads(doc.read_text()), {"dim": 14})
    assert (cfg.u1, cfg.u2, cfg.dim) == (0.2, 0.05, 14)
    with pytest.raises(ConfigError, match="'colour'"):
        build_run_config("evolve", {"colour": 1})
    with pytest.raises(ConfigError, match="grid axis 'u3'"):
        build_run_config("optimize", {"grid": {"u1": [0, 0, 1], "u2": [0, 0, 1], "alpha2": [0, 0, 1], "u3": []}})


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["evolve", "--config", str(bad)]) == EXIT_CONFIG
    assert run(tmp_path, "evolve", "--u1", "1.5") == EXIT_CONFIG
    assert run(tmp_path, "evolve", "--format", "xml") == EXIT_CONFIG
    assert run(tmp_path, "optimize", "--grid", SMALL_GRID, "--epsilons", "[0.01]") == EXIT_NUMERICAL
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["evolve", "--out_dir", str(blocker / "sub")]) == EXIT_IO
    with pytest.raises(SystemExit) as info:
        main(["evolve", "--no-such-flag", "1"])
    assert info.value.code == 2


def test_qfi_curve(tmp_path):
    assert run(tmp_path, "qfi-curve", "--tau_grid", "[0, 4, 5]") == EXIT_OK
    rows = read_csv(tmp_path / "qfi_curve.csv")
    assert len(rows) == 4 * 5 * 2
    table = {(float(r["tau"]), r["control"], r["method"]): float(r["qfi"]) for r in rows}
    for control in ("none", "linear", "kerr", "both"):
        assert table[(0.0, control, "exact_eig")] == 0.0
    assert table[(2.0, "none", "closed_form")] == pytest.approx(4 * math.exp(-2), abs=1e-15)
    for method in ("exact_eig", "closed_form"):
        assert table[(2.0, "both", method)] >= table[(2.0, "kerr", method)]
        assert table[(2.0, "linear", method)] >= table[(2.0, "none", method)]


def test_fidelity_curve(tmp_path):
    assert run(tmp_path, "fidelity-curve", "--tau-grid", "[0, 4, 41]") == EXIT_OK
    rows = read_csv(tmp_path / "fidelity_curve.csv")
    table = {(float(r["tau"]), r["control"], r["method"]): float(r["fidelity"]) for r in rows}
    assert abs(table[(0.0, "both", "uhlmann")] - 1) < 1e-9
    assert table[(0.0, "none", "pure_closed_form")] == pytest.approx(4 * math.exp(-2), abs=1e-15)
    taus = sorted({k[0] for k in table if k[0] > 0})
    for method in ("uhlmann", "pure_closed_form"):
        for control in ("linear", "kerr", "both"):
            assert all(table[(t, control, method)] <= table[(t, "none", method)] for t in taus)


def test_optimize(tmp_path):
    assert run(tmp_path, "optimize", "--grid", SMALL_GRID, "--epsilons", "[0.1, 0.15, 1]") == EXIT_OK
    report = json.loads((tmp_path / "optimize_report.json").read_text())
    r10, r15, r100 = report["reports"]
    assert r15["best"]["i_star"] >= r10["best"]["i_star"]
    assert (r100["best"]["u1"], r100["best"]["u2"]) == (0.99, 0.99)
    surface = read_csv(tmp_path / "optimize_surface.csv")
    assert list(surface[0]) == ["u1", "u2", "i_star", "d"] and len(surface) == 144
    front = read_csv(tmp_path / "optimize_front.csv")
    ds = [float(r["d"]) for r in front]
    assert ds == sorted(ds)


def test_scan_alpha(tmp_path):
    grid = '{"u1": [0, 0, 1], "u2": [0, 0.99, 6], "alpha2": [0, 0.99, 7]}'
    assert run(tmp_path, "scan-alpha", "--grid", grid) == EXIT_OK
    rows = read_csv(tmp_path / "scan_alpha.csv")
    assert list(rows[0]) == ["u2", "alpha2", "i_star", "d"]
    assert float(rows[0]["i_star"]) == 0.0 and float(rows[0]["d"]) == 0.0
    i = np.array([float(r["i_star"]) for r in rows]).reshape(6, 7)
    assert np.all(np.diff(i, axis=1) > 0)
    d = np.array([float(r["d"]) for r in rows])
    assert np.all((d >= 0) & (d <= 1))


def test_estimate(tmp_path):
    common = ["--alpha_re", "1", "--dim", "10", "--duration", "0.5"]
    assert run(tmp_path, "estimate", *common, "--candidates", "[0.5, 1, 2]") == EXIT_OK
    summary = json.loads((tmp_path / "estimate_summary.json").read_text())
    assert 0.5 <= summary["final_gamma_hat"] <= 2
    assert summary["candidates"] == [0.5, 1.0, 2.0] and summary["seed"] == 0
    rows = read_csv(tmp_path / "estimate_series.csv")
    assert list(rows[0]) == ["t", "gamma_hat", "p_1", "p_2", "p_3"] and len(rows) == 501

    assert run(tmp_path, "estimate", *common, "--candidates", "[1.7]") == EXIT_OK
    assert {r["gamma_hat"] for r in read_csv(tmp_path / "estimate_series.csv")} == {"1.7"}

    assert run(tmp_path, "estimate", *common, "--efficiency", "0", "--candidates", "[0.5, 1, 2]") == EXIT_OK
    rows = read_csv(tmp_path / "estimate_series.csv")
    for col in ("p_1", "p_2", "p_3"):
        assert len({r[col] for r in rows}) == 1


def test_random_candidates(tmp_path):
    spec = '{"center": 1.0, "spread": 0.5, "n": 4, "seed": 3}'
    assert run(tmp_path, "estimate", "--alpha_re", "1", "--dim", "10", "--duration", "0.1",
               "--candidates", spec) == EXIT_OK
    summary = json.loads((tmp_path / "estimate_summary.json").read_text())
    assert len(summary["candidates"]) == 4


def test_evolve_and_float_round_trip(tmp_path):
    assert run(tmp_path, "evolve", "--dim", "6", "--tau_grid", "[0, 1, 3]") == EXIT_OK
    rows = read_csv(tmp_path / "evolve_rho.csv")
    assert len(rows) == 3 * 36
    from dampqfi.dynamics import analytic_matrix
    from dampqfi.fock import SystemConfig

    rho = analytic_matrix(SystemConfig(alpha=1.0, u1=0.05, u2=0.05, dim=6), 0.5)
    for r in rows:
        if r["tau"] == "0.5":
            assert float(r["re"]) == rho[int(r["p"]), int(r["q"])].real
    summary = json.loads((tmp_path / "evolve_summary.json").read_text())
    assert [s["tau"] for s in summary["states"]] == [0.0, 0.5, 1.0]


def test_json_format_and_no_temp_files(tmp_path):
    assert run(tmp_path, "scan-alpha", "--format", "json",
               "--grid", '{"u1": [0, 0, 1], "u2": [0, 0.5, 2], "alpha2": [0.2, 0.2, 1]}') == EXIT_OK
    doc = json.loads((tmp_path / "scan_alpha.json").read_text())
    assert doc["columns"] == ["u2", "alpha2", "i_star", "d"] and len(doc["rows"]) == 2
    assert sorted(p.name for p in tmp_path.iterdir()) == ["scan_alpha.json"]
