import json
import math
import os
import subprocess
import sys

import pytest

from fraclab.cli import build_parser, main, parse_spec
from fraclab.functions import IndicatorBall, IndicatorBox, RadialPowerLog, SpecError

SUBCOMMANDS = ["eval", "norm", "region", "sweep", "sharpness", "verify"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_eval_midpoint_ball(capsys):
    code, out, _ = run(capsys, "eval", "--f", "ball:0,1", "--g", "ball:0,1", "--alpha", "0.5",
                       "--d", "1", "--theta", "0.5", "--x", "0")
    assert code == 0
    rec = json.loads(out)
    assert rec["value"] == pytest.approx(4 * math.sqrt(2), rel=1e-6)
    assert rec["error"] >= 0


def test_eval_theta_zero_is_product(capsys):
    _, out, _ = run(capsys, "eval", "--f", "ball:0,1", "--g", "ball:0,1", "--alpha", "0.5",
                    "--theta", "0", "--x", "0", "--rel-tol", "1e-8")
    _, riesz, _ = run(capsys, "eval", "--op", "riesz", "--f", "ball:0,1", "--alpha", "0.5",
                      "--x", "0", "--rel-tol", "1e-8")
    assert json.loads(out)["value"] == pytest.approx(json.loads(riesz)["value"], rel=1e-8)
    assert json.loads(riesz)["value"] == pytest.approx(4.0, rel=1e-8)


@pytest.mark.parametrize("spec", ["ball:", "ring:0,1", "box:0,1,2", "ball:a,1", "{bad json"])
def test_eval_malformed_spec_exits_2(capsys, spec):
    code, _, err = run(capsys, "eval", "--f", spec, "--g", "ball:0,1", "--alpha", "0.5",
                       "--x", "0")
    assert code == 2
    assert "invalid configuration" in err


def test_eval_missing_option_exits_2(capsys):
    code, _, err = run(capsys, "eval", "--f", "ball:0,1", "--alpha", "0.5")
    assert code == 2 and "--x" in err


def test_eval_bad_alpha_exits_2(capsys):
    code, _, _ = run(capsys, "eval", "--f", "ball:0,1", "--g", "ball:0,1", "--alpha", "1.5",
                     "--x", "0")
    assert code == 2


def test_unknown_flag_exits_2(capsys):
    code, _, err = run(capsys, "region", "--colour", "red")
    assert code == 2 and "unrecognized" in err


def test_parse_spec_forms(tmp_path):
    assert parse_spec("ball:0,0,2") == IndicatorBall([0.0, 0.0], 2.0)
    assert parse_spec("box:0,1,2,3") == IndicatorBox([0.0, 1.0], [2.0, 3.0])
    h = parse_spec("h:0.5")
    assert isinstance(h, RadialPowerLog) and h.kappa == 0.75
    path = tmp_path / "f.json"
    path.write_text(json.dumps({"kind": "ball", "center": [1.0], "radius": 0.5}))
    assert parse_spec("@" + str(path)) == IndicatorBall([1.0], 0.5)
    with pytest.raises(SpecError):
        parse_spec("bump:1")


def test_config_file_supplies_values(capsys, tmp_path):
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps({"p": "10/7", "q": "2", "alpha": "1/2"}))
    code, out, _ = run(capsys, "region", "--config", str(conf))
    assert code == 0
    assert json.loads(out)["region"] == "EdgeBottom"
    # flags win over file values
    _, out, _ = run(capsys, "region", "--config", str(conf), "--q", "10/7")
    assert json.loads(out)["region"] == "SquareInterior"


def test_unknown_config_key_exits_2(capsys, tmp_path):
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps({"p": 2, "q": 2, "alpha": 0.5, "colour": "red"}))
    code, _, err = run(capsys, "region", "--config", str(conf))
    assert code == 2 and "colour" in err


def test_config_not_an_object_exits_2(capsys, tmp_path):
    conf = tmp_path / "run.json"
    conf.write_text("[1, 2]")
    assert run(capsys, "region", "--config", str(conf))[0] == 2


def test_missing_config_file_exits_4(capsys, tmp_path):
    code, _, err = run(capsys, "region", "--config", str(tmp_path / "nope.json"))
    assert code == 4 and "nope.json" in err


def test_unwritable_output_exits_4(capsys, tmp_path):
    target = tmp_path / "missing_dir" / "out.json"
    code, _, err = run(capsys, "region", "--p", "2", "--q", "2", "--alpha", "0.5",
                       "--out", str(target))
    assert code == 4 and "missing_dir" in err


def test_region_json_fields(capsys):
    code, out, _ = run(capsys, "region", "--p", "2", "--q", "2", "--alpha", "0.5", "--d", "1")
    assert code == 0
    rec = json.loads(out)
    for k in ("p", "q", "alpha", "d", "r", "region", "bound", "theorem", "uniformity"):
        assert k in rec
    # (1/p, 1/q) = (1/2, 1/2) sits on the corner where both edges meet
    assert rec["region"] == "CornerSW"
    assert rec["r"] == 2.0


def test_region_interior(capsys):
    _, out, _ = run(capsys, "region", "--p", "10/7", "--q", "10/7", "--alpha", "1/2")
    assert json.loads(out)["region"] == "SquareInterior"


def test_region_invalid_exponent_exits_2(capsys):
    assert run(capsys, "region", "--p", "0.5", "--q", "2", "--alpha", "0.5")[0] == 2


def test_norm_of_ball(capsys):
    code, out, _ = run(capsys, "norm", "--f", "ball:0,1", "--kind", "lorentz", "--p", "2")
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(2 * math.sqrt(2), rel=1e-12)
    _, out, _ = run(capsys, "norm", "--f", "ball:0,1", "--kind", "lebesgue", "--p", "inf")
    assert json.loads(out)["value"] == 1.0


def test_norm_of_field_csv(capsys, tmp_path):
    from fraclab.norms import SampledField
    field = SampledField([[0.25], [0.75]], [0.5, 0.5], [2.0, 1.0], ([0.0], [1.0]))
    path = tmp_path / "field.csv"
    field.to_csv(path)
    code, out, _ = run(capsys, "norm", "--field", str(path), "--kind", "weak", "--p", "1")
    assert code == 0
    rec = json.loads(out)
    # sup over lambda of lambda |{f > lambda}|: max(2 * 0.5, 1 * 1) = 1
    assert rec["value"] == pytest.approx(1.0)
    assert rec["cells"] == 2


def test_norm_needs_exactly_one_source(capsys):
    assert run(capsys, "norm", "--p", "2")[0] == 2
    assert run(capsys, "norm", "--p", "2", "--f", "ball:0,1", "--field", "x.csv")[0] == 2


SWEEP = ["sweep", "--f", "ball:0,1", "--g", "ball:0,1", "--p", "1.5", "--q", "1",
         "--alpha", "0.5", "--cells", "512"]


def test_sweep_empty_theta_grid_exits_2(capsys):
    code, _, err = run(capsys, *SWEEP, "--thetas", "")
    assert code == 2 and "theta" in err
    assert run(capsys, *SWEEP, "--theta-count", "0")[0] == 2


def test_sweep_invalid_point_exits_2(capsys):
    args = list(SWEEP)
    args[args.index("--p") + 1] = "8"
    args[args.index("--q") + 1] = "8"
    assert run(capsys, *args)[0] == 2


def test_sweep_csv_and_plot(capsys, tmp_path):
    out = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, *SWEEP, "--thetas", "0,0.5,1", "--out", str(out), "--plot")
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 4
    svg = (tmp_path / "sweep.svg").read_text()
    assert svg.startswith("<svg") or svg.startswith("<?xml")
    assert "polyline" in svg or "circle" in svg


def test_sweep_rerun_is_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, *SWEEP, "--thetas", "0.25,0.75", "--out", str(a))
    run(capsys, *SWEEP, "--thetas", "0.25,0.75", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_stdout_rerun_is_byte_identical(capsys):
    _, first, _ = run(capsys, *SWEEP, "--thetas", "0.5", "--format", "json")
    _, second, _ = run(capsys, *SWEEP, "--thetas", "0.5", "--format", "json")
    assert first == second
    assert json.loads(first)[0]["walltime_ms"] == 0.0


def test_sharpness_bad_k_range_exits_2(capsys):
    assert run(capsys, "sharpness", "--case", "I", "--k-range", "4-8")[0] == 2


def test_sharpness_small_run(capsys, tmp_path):
    out = tmp_path / "case.json"
    code, _, err = run(capsys, "sharpness", "--case", "I", "--k-range", "4:6",
                       "--format", "json", "--out", str(out))
    assert code == 0
    recs = json.loads(out.read_text())
    assert [r["t"] for r in recs] == [2.0 ** -4, 2.0 ** -5, 2.0 ** -6]
    report = json.loads(err.strip().splitlines()[-1])
    assert report["increasing"] is True


def test_verify_aux0(capsys, tmp_path):
    out = tmp_path / "report.json"
    code, _, _ = run(capsys, "verify", "--lemma", "aux0", "--suite", "default",
                     "--out", str(out))
    assert code == 0
    report = json.loads(out.read_text())
    assert report["passed"] is True
    consts = report["lemmas"]["aux0"]
    assert all(c <= 1 + 1e-3 for per in consts.values() for c in per.values())


def test_verify_unknown_lemma_exits_2(capsys):
    assert run(capsys, "verify", "--lemma", "nonsense")[0] == 2


def test_verify_lower_bound(capsys):
    code, out, _ = run(capsys, "verify", "--lemma", "lower-bound")
    assert code == 0 and json.loads(out)["constant"] > 0


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_for_every_subcommand(capsys, cmd):
    assert main([cmd, "--help"]) == 0
    out = capsys.readouterr().out
    assert "--config" in out and "--seed" in out


def test_every_config_key_is_documented():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    for name in SUBCOMMANDS:
        for action in sub[name]._actions:
            if action.dest != "help":
                assert action.help, (name, action.dest)


def test_threads_flag_does_not_change_output(capsys):
    base = ["eval", "--f", "ball:0,1", "--g", "ball:0.5,1", "--alpha", "0.5", "--x", "0.2"]
    _, one, _ = run(capsys, *base, "--threads", "1")
    _, four, _ = run(capsys, *base, "--threads", "4")
    assert one == four


def test_console_entry_point():
    env = dict(os.environ)
    proc = subprocess.run([sys.executable, "-m", "fraclab.cli", "region", "--p", "1",
                           "--q", "1", "--alpha", "0.5"], capture_output=True, text=True,
                          env=env, timeout=60)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["region"] == "CornerNE"
    proc = subprocess.run([sys.executable, "-m", "fraclab.cli", "eval", "--f", "ball:"],
                          capture_output=True, text=True, env=env, timeout=60)
    assert proc.returncode == 2
