import json

import numpy as np
import pytest

from lapbounds.calculus import ScalarField
from lapbounds.cli import main, parse_domain, parse_schedule, parse_space
from lapbounds.space import build_model_space


def run(argv, capsys):
    status = main(argv)
    out, err = capsys.readouterr()
    return status, (json.loads(out) if out.strip() else None), err


def test_parse_space_variants(tmp_path):
    assert parse_space("grid:11").n == 121
    assert parse_space("hyperbolic:16,radius=1.5").kind == "hyperbolic_disc"
    with pytest.raises(ValueError):
        parse_space("grid")
    with pytest.raises(ValueError):
        parse_space("grid:x")


def test_parse_domain_variants(tmp_path):
    s = build_model_space("interval", 21)
    assert parse_domain(s, "ball:center:0.2").interior.size > 0
    dom = parse_domain(s, "vertices:5,6,7")
    assert dom.interior.tolist() == [5, 6, 7] and dom.boundary.tolist() == [4, 8]
    (tmp_path / "d.json").write_text(json.dumps({"interior": [3, 4]}))
    assert parse_domain(s, str(tmp_path / "d.json")).boundary.tolist() == [2, 5]


def test_parse_schedule():
    g = build_model_space("euclidean_grid", 51)
    assert len(parse_schedule(g, "c_eff=8,count=6").t_values) == 6
    assert parse_schedule(g, "0.01,0.02,0.03,0.04").window == (0.01, 0.04)
    with pytest.raises(ValueError):
        parse_schedule(g, "1e-6,2e-6,3e-6,4e-6")


def test_check_equality_case(capsys):
    status, rep, _ = run(["check", "--space", "grid:51", "--f", "(x^2+y^2)/2", "--eta", "2",
                          "--notion", "all", "--no-timestamp"], capsys)
    assert status == 0
    assert rep["result"]["matrix"]["consistent"]
    hdr = rep["result"]["header"]
    assert hdr["mesh_scale"] == pytest.approx(0.02) and len(hdr["schedule"]) == 5


def test_check_failure_status(capsys):
    status, rep, _ = run(["check", "--space", "grid:51", "--f", "(x^2+y^2)/2", "--eta", "1.5",
                          "--notion", "dist_form,dist_dual", "--no-timestamp"], capsys)
    assert status == 1
    assert [v["notion"] for v in rep["result"]["matrix"]["verdicts"]] == ["dist_form", "dist_dual"]


def test_check_csv_field(tmp_path, capsys):
    s = build_model_space("euclidean_grid", 51)
    ScalarField(s, (s.coords ** 2).sum(axis=1) / 2).to_csv(tmp_path / "f.csv")
    status, _, _ = run(["check", "--space", "grid:51", "--f", str(tmp_path / "f.csv"), "--eta", "2",
                        "--notion", "dist_form", "--no-timestamp"], capsys)
    assert status == 0


def test_distance_comparison_sphere(tmp_path, capsys):
    status, rep, _ = run(["distance-comparison", "--space", "sphere2:64", "--set", "hemisphere",
                          "--csv", str(tmp_path / "m.csv"), "--no-timestamp"], capsys)
    assert status == 0
    assert rep["result"]["margin_table"]
    assert (tmp_path / "m.csv").read_text().startswith("d_lo,d_hi")


def test_min_and_max_principle(capsys):
    status, rep, _ = run(["min-principle", "--space", "grid:31", "--domain", "ball:center:0.3",
                          "--seed", "4", "--no-timestamp"], capsys)
    assert status == 0
    status, rep, _ = run(["min-principle", "--space", "grid:31", "--domain", "ball:center:0.3",
                          "--f", "d(center)^2", "--no-timestamp"], capsys)
    assert status == 1
    status, rep, _ = run(["max-principle", "--space", "grid:31", "--f", "d(center)^2",
                          "--no-timestamp"], capsys)
    assert status == 0 and rep["result"]["decay_holds"]


def test_hopflax_and_heat(tmp_path, capsys):
    status, rep, _ = run(["hopflax", "--space", "grid:31", "--f", "x^2+y", "--t", "0.1", "0.05",
                          "--eta", "2", "--no-timestamp"], capsys)
    assert status == 0 and len(rep["result"]["hopf_lax"]) == 2
    status, rep, _ = run(["heat", "--space", "interval:101", "--f", "sin(3*x)", "--no-timestamp"], capsys)
    assert status == 0
    assert rep["result"]["derivative"]["max_abs_difference_to_laplacian"] < 0.05


def test_build_space_round_trip(tmp_path, capsys):
    path = tmp_path / "s.json"
    status, rep, _ = run(["build-space", "--space", "interval:11", "--out", str(path)], capsys)
    assert status == 0 and path.exists()
    status, rep, _ = run(["heat", "--space", str(path), "--f", "x", "--t", "0.01",
                          "--no-timestamp"], capsys)
    assert status == 0 and rep["result"]["heat"][0]["mass"] == pytest.approx(0.5)


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("command: check\nspace: grid:51\nf: (x^2+y^2)/2\neta: 2\nnotion: dist_form\n"
                   "no_timestamp: true\n")
    status, rep, _ = run(["--config", str(cfg)], capsys)
    assert status == 0
    # explicit flags win over the file
    status, rep, _ = run(["check", "--config", str(cfg), "--eta", "1"], capsys)
    assert status == 1


@pytest.mark.parametrize("content", ["", "# nothing\n", "{}"])
def test_empty_config(tmp_path, capsys, content):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(content)
    status, rep, err = run(["check", "--config", str(cfg)], capsys)
    assert status == 2 and "empty" in err


@pytest.mark.parametrize("argv, msg", [
    (["check", "--space", "grid:21", "--f", "x"], "--eta"),
    (["check", "--space", "moon:3", "--f", "x", "--eta", "1"], "kind"),
    (["check", "--space", "grid:21", "--f", "missing.csv", "--eta", "1"], "does not exist"),
    (["check", "--space", "grid:21", "--f", "log(x)", "--eta", "1"], "not finite"),
    (["check", "--f", "x", "--eta", "1"], "--space"),
    (["check", "--space", "grid:21", "--f", "x", "--eta", "1", "--schedule", "1,2"], "at least 4"),
    (["bogus"], ""),
    ([], ""),
])
def test_errors_exit_2(capsys, argv, msg):
    status, rep, err = run(argv, capsys)
    assert status == 2 and rep is None
    assert msg in err


def test_deterministic_reports(tmp_path):
    args = ["equivalence", "--space", "grid:41", "--count", "2", "--seed", "7", "--no-timestamp"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(args + ["--out", str(a)]) == main(args + ["--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_timestamp_present_by_default(capsys):
    status, rep, _ = run(["heat", "--space", "interval:21", "--f", "1", "--t", "0.1"], capsys)
    assert "timestamp" in rep and status == 0
