import json

import pytest

from hurwitz_wp.cli import (EXIT_BUDGET, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, OUTPUT_DIR_ENV,
                            convergence_flags, git_hash, read_config_file, run)


def call(tmp_path, *argv, name="out.json"):
    out = tmp_path / name
    code = run(list(argv) + ["--out", str(out)])
    data = json.loads(out.read_text()) if out.exists() else None
    return code, data


def test_enumerate_example(tmp_path):
    code, data = call(tmp_path, "enumerate", "--n", "3", "--b", "4")
    assert code == EXIT_OK and data["result"]["count"] == 4
    assert data["provenance"]["config"]["n"] == 3


def test_dims_example(tmp_path):
    code, data = call(tmp_path, "dims", "--n", "2", "--h", "0", "--b", "6")
    prof = data["result"]["profile"]
    assert code == EXIT_OK
    assert (prof["h0_pullback"], prof["t1"], prof["h1_tx"], prof["h1_pullback"]) == (3, 6, 3, 0)
    assert all(prof["determined"].values())


def test_identity_check_example(tmp_path):
    code, data = call(tmp_path, "identity-check", "--samples", "1000", "--seed", "7")
    assert code == EXIT_OK and data["result"]["max_residual"] <= 1e-12


def test_orbits_from_enumerate_output(tmp_path):
    call(tmp_path, "enumerate", "--n", "4", "--b", "6", name="classes.json")
    code, data = call(tmp_path, "orbits", "--classes", str(tmp_path / "classes.json"))
    assert code == EXIT_OK and data["result"]["num_orbits"] == 1


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# dims of a trigonal cover\nn = 3\nh = 0\nb = 8\n")
    code, data = call(tmp_path, "dims", "--config", str(cfg), "--b", "10")
    assert code == EXIT_OK
    assert (data["result"]["n"], data["result"]["b"]) == (3, 10)
    assert read_config_file(cfg) == {"n": "3", "h": "0", "b": "8"}


@pytest.mark.parametrize("argv,code", [
    (["dims", "--n", "2", "--b", "5"], EXIT_CONFIG),
    (["dims", "--n", "x"], EXIT_CONFIG),
    (["frobnicate"], EXIT_CONFIG),
    (["enumerate", "--n", "8", "--b", "4"], EXIT_BUDGET),
    (["solve-metric", "--refinement", "6"], EXIT_BUDGET),
    (["convergence", "--refinements", "1,2"], EXIT_CONFIG),
    (["convergence", "--refinements", "2,1,3"], EXIT_CONFIG),
    (["wp-norm", "--eps", "1e-3,2e-3"], EXIT_CONFIG),
    (["wp-norm", "--tol", "-1"], EXIT_CONFIG),
    (["wp-norm", "--k", "7", "--refinement", "0"], EXIT_CONFIG),
    (["solve-metric", "--refinement", "1", "--tol", "1e-15", "--max-iter", "1"], EXIT_SOLVER),
])
def test_exit_codes(tmp_path, capsys, argv, code):
    assert run(argv + ["--out", str(tmp_path / "x.json")]) == code
    report = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert report["exit_code"] == code and report["status"] == "error"


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nn = 3\n")
    assert run(["dims", "--config", str(cfg)]) == EXIT_CONFIG
    cfg.write_text("just words\n")
    assert run(["dims", "--config", str(cfg)]) == EXIT_CONFIG


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "results"))
    assert run(["dims"]) == EXIT_OK
    assert (tmp_path / "results" / "dims.json").exists()


def test_provenance_hash(tmp_path):
    _, a = call(tmp_path, "dims", name="a.json")
    _, b = call(tmp_path, "dims", name="b.json")
    _, c = call(tmp_path, "dims", "--b", "8", name="c.json")
    assert a["provenance"]["input_hash"] == b["provenance"]["input_hash"]
    assert a["provenance"]["input_hash"] != c["provenance"]["input_hash"]
    assert git_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"


def test_solve_metric_outputs(tmp_path):
    mesh, fields = tmp_path / "mesh.json", tmp_path / "u.csv"
    code, data = call(tmp_path, "solve-metric", "--refinement", "1", "--mesh-out", str(mesh),
                      "--dump-fields", str(fields))
    res = data["result"]
    assert code == EXIT_OK and res["converged"] and res["genus"] == 2
    assert res["gauss_bonnet_error"] < 1e-12 and res["area_error"] < 0.01
    assert len(json.loads(mesh.read_text())["vertices"]) == res["vertices"]
    assert fields.read_text().splitlines()[0].startswith("vertex,u,mass")


def test_wp_norm_with_surface_file(tmp_path, hexagon):
    surf = tmp_path / "hex.json"
    surf.write_text(json.dumps(hexagon.to_json()))
    dump = tmp_path / "fields.csv"
    code, data = call(tmp_path, "wp-norm", "--surface", str(surf), "--k", "1",
                      "--refinement", "1", "--eps", "1e-3", "--dump-fields", str(dump))
    res = data["result"]
    assert code == EXIT_OK and res["wp_total"] > 0
    assert abs(res["fiber_integral"] - res["g0_direct"] - res["g1"]) < 1e-10 * res["wp_total"]
    assert {"identity", "ell", "phi_min", "mu_max"} <= set(res["residuals"])
    assert "mu_abs2" in dump.read_text().splitlines()[0]


def test_convergence_reproducible_across_workers(tmp_path):
    table = tmp_path / "t.csv"
    code, one = call(tmp_path, "convergence", "--refinements", "0,1,2", "--eps", "1e-3",
                     "--table-out", str(table), name="w1.json")
    _, three = call(tmp_path, "convergence", "--refinements", "0,1,2", "--eps", "1e-3",
                    "--workers", "3", name="w3.json")
    assert code == EXIT_OK
    assert one["result"] == three["result"]
    assert one["provenance"]["input_hash"] == three["provenance"]["input_hash"]
    flags = one["result"]["flags"]
    assert flags["area_error_decreasing"] and flags["wp_total_differences_decreasing"]
    assert len(table.read_text().splitlines()) == 4


def test_partial_report_on_failure(tmp_path):
    code, data = call(tmp_path, "convergence", "--refinements", "0,1,2", "--tol", "1e-30")
    assert code == EXIT_SOLVER
    assert data["status"] == "partial" and data["result"]["levels"] == []


def test_flags_on_handmade_table():
    rows = [{"refinement": r, "area_error": a, "ell_residual": e, "g0_gap": g, "wp_total": w}
            for r, a, e, g, w in [(1, 3, 5, 4, 1.0), (2, 2, 6, 2, 1.5), (3, 1, 4, 1, 1.6)]]
    flags = convergence_flags(rows)
    assert flags["area_error_decreasing"] and not flags["ell_residual_decreasing"]
    assert flags["wp_total_differences_decreasing"]
