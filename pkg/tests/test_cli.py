import json

import pytest

from conftest import make_frame
from threatgrid.cli import main
from threatgrid.config import ConfigError, RunConfig, build_config, parse_config_text
from threatgrid.grid import serialize_frame
from threatgrid.prediction import serialize_plan
from threatgrid.sim import build_scenario

SHORT = ["--set", "duration=3.1"]  # turning-in collides at ~3.05 s


def test_bad_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--bad-flag"])
    assert exc.value.code == 2
    assert "usage:" in capsys.readouterr().err


def test_invalid_value_names_key(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path), "--set", "eps=-1"]) == 2
    assert "eps" in capsys.readouterr().err
    assert main(["run", "--out", str(tmp_path), "--set", "nonsense=1"]) == 2
    assert "nonsense" in capsys.readouterr().err
    assert main(["run", "--out", str(tmp_path), "--phi-u", "60"]) == 2
    assert "phi_u" in capsys.readouterr().err


def test_scenario_failure_exits_3(tmp_path, capsys):
    code = main(["run", "--scenario", "straight-crossing", "--set", "crossing_x=500", "--out", str(tmp_path)])
    assert code == 3
    assert "scenario" in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# comment\nscenario = straight-crossing\nhorizon = 2.0\nseed = 3\n")
    values = parse_config_text(cfg_file.read_text())
    assert values == {"scenario": "straight-crossing", "horizon": 2.0, "seed": 3}
    cfg = build_config(values, {"horizon": 2.5})
    assert cfg.scenario == "straight-crossing" and cfg.horizon == 2.5 and cfg.seed == 3
    with pytest.raises(ConfigError) as exc:
        parse_config_text("horizon 3\n")
    assert "line 1" in str(exc.value)
    # the echoed config parses back to the same values
    assert build_config(parse_config_text(cfg.to_text()), {}) == cfg


def test_run_writes_result(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--scenario", "turning-in", "--horizon", "3.0", "--phi-u", "0", "--out", str(out)]) == 0
    res = json.loads((out / "result.json").read_text())
    assert res["rittr"] >= 3.0
    assert res["scenario"] == "turning-in" and res["horizon"] == 3.0
    echoed = parse_config_text((out / "config.txt").read_text())
    assert echoed["scenario"] == "turning-in"
    assert len((out / "reports.jsonl").read_text().splitlines()) == 51
    assert (out / "timeline.csv").read_text().startswith("t,n_clusters,threat,")
    assert "rittr=" in capsys.readouterr().out


def test_run_turning_over_phi_ordering(tmp_path):
    r = {}
    for phi in ("0", "10"):
        out = tmp_path / phi
        assert main(["run", "--scenario", "turning-over", "--phi-u", phi, "--out", str(out)]) == 0
        r[phi] = json.loads((out / "result.json").read_text())["rittr"]
    assert r["10"] > r["0"]


def test_run_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["run", "--scenario", "straight-crossing", "--seed", "7", "--out", str(tmp_path / name)]) == 0
    for f in ("result.json", "reports.jsonl", "timeline.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_detect_reproduces_run(tmp_path, capsys):
    run = tmp_path / "run"
    assert main(["run", "--emit-frames", "--out", str(run), *SHORT]) == 0
    exp = tmp_path / "exp"
    assert main(["export-scenario", "--out", str(exp), *SHORT]) == 0
    assert (exp / "frames.dogm").read_bytes() == (run / "frames.dogm").read_bytes()
    assert (exp / "plan.txt").read_bytes() == (run / "plan.txt").read_bytes()
    det = tmp_path / "det"
    assert main(["detect", "--frames", str(exp / "frames.dogm"), "--plan", str(exp / "plan.txt"),
                 "--out", str(det)]) == 0
    assert (det / "reports.jsonl").read_bytes() == (run / "reports.jsonl").read_bytes()


def _small_plan(tmp_path):
    p = tmp_path / "plan.txt"
    p.write_text(serialize_plan(build_scenario("turning-in").ego))
    return p


def test_detect_empty_frames_file(tmp_path, capsys):
    frames = tmp_path / "empty.dogm"
    frames.write_text("")
    assert main(["detect", "--frames", str(frames), "--plan", str(_small_plan(tmp_path))]) == 0
    assert capsys.readouterr().out == ""


def test_detect_streams_to_stdout(tmp_path, capsys):
    frames = tmp_path / "f.dogm"
    frames.write_text(serialize_frame(make_frame({(1, 1): (0.9, 0.0, 2.0, 0.0)}, timestamp=0.5)))
    assert main(["detect", "--frames", str(frames), "--plan", str(_small_plan(tmp_path))]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1 and json.loads(lines[0])["timestamp"] == 0.5


def test_detect_mass_violation_exits_4(tmp_path, capsys):
    text = serialize_frame(make_frame({}, width=2, height=2)).splitlines()
    text[3] = "0.8 0.4 0.0 0.0 0.0 0.0 0.0"
    frames = tmp_path / "bad.dogm"
    frames.write_text("\n".join(text) + "\n")
    assert main(["detect", "--frames", str(frames), "--plan", str(_small_plan(tmp_path))]) == 4
    err = capsys.readouterr().err
    assert "bad.dogm" in err and "line 4" in err and "cell 2" in err


def test_detect_bad_plan_exits_4(tmp_path, capsys):
    plan = tmp_path / "plan.txt"
    plan.write_text("PLAN v1 4 2\n0 0 0\n")
    frames = tmp_path / "f.dogm"
    frames.write_text("")
    assert main(["detect", "--frames", str(frames), "--plan", str(plan)]) == 4
    assert "line 2" in capsys.readouterr().err


def test_bench_structure_and_workload_determinism(tmp_path):
    docs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["bench", "--n-frames", "30", "--out", str(out)]) == 0
        docs.append(json.loads((out / "bench.json").read_text()))
        assert len((out / "bench.csv").read_text().splitlines()) == 31
    a, b = docs
    assert a["n_frames"] == b["n_frames"] == 30
    assert list(a["stages"]) == list(b["stages"])
    assert set(a["stages"]) == {"mask", "dbscan", "plausibilize", "attributes", "ego_prediction", "evaluate"}
    for s in a["stages"].values():
        assert s["median_ms"] >= 0 and s["p95_ms"] >= s["median_ms"]
    assert a["overhead"] > 0 and a["grid"] == [300, 300]


def test_svg_outputs(tmp_path):
    out = tmp_path / "svg"
    assert main(["run", "--scenario", "straight-crossing", "--emit-svg", "--out", str(out)]) == 0
    assert (out / "scene.svg").read_text().lstrip().startswith("<?xml")


def test_default_config_is_valid():
    cfg = RunConfig()
    cfg.validate()
    assert cfg.pipeline_config().prediction.horizon == 3.0
