import json
import subprocess
import sys

import pytest

from turbcloud.cli import main
from turbcloud.config import parse_config
from turbcloud.errors import ConfigError
from turbcloud.io import read_table


def _run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# -- configuration ----------------------------------------------------------

def test_defaults_with_required_key():
    cfg = parse_config("sine1d", flags={"out": "s.csv"}, env={})
    assert cfg["a"] == 1.0 and cfg["t_end"] == 200.0 and cfg.sources["a"] == "default"
    assert cfg.sources["out"] == "flag"


def test_unknown_key_named(tmp_path):
    with pytest.raises(ConfigError) as exc:
        parse_config("sine1d", flags={"out": "s.csv", "tau_q": 1.0}, env={})
    assert exc.value.key == "tau_q"
    cfg_file = tmp_path / "c.yaml"
    cfg_file.write_text("tau_q: 2\n")
    with pytest.raises(ConfigError) as exc:
        parse_config("sine1d", file=cfg_file, flags={"out": "s.csv"}, env={})
    assert exc.value.key == "tau_q"


def test_flag_overrides_file(tmp_path):
    cfg_file = tmp_path / "c.yaml"
    cfg_file.write_text("tau_p: 2.0\nomega: 3.0\nout: file.csv\n")
    cfg = parse_config("sine1d", file=cfg_file, flags={"tau_p": "0.5"}, env={})
    assert cfg["tau_p"] == 0.5 and cfg.sources["tau_p"] == "flag"
    assert cfg["omega"] == 3.0 and cfg.sources["omega"] == "file"
    assert cfg.sidecar("x")["sources"]["tau_p"] == "flag"


def test_type_errors_name_the_key(tmp_path):
    for flags, key in (({"reps": "many"}, "reps"), ({"reps": True}, "reps"), ({"ns": "8,x"}, "ns"),
                       ({"field": "gravity"}, "field"), ({"sigma": "nan"}, "sigma")):
        with pytest.raises(ConfigError) as exc:
            parse_config("chaos", flags={"out": "c.csv", **flags}, env={})
        assert exc.value.key == key


def test_missing_required_key():
    with pytest.raises(ConfigError) as exc:
        parse_config("chaos", flags={}, env={})
    assert exc.value.key == "out"


def test_seed_environment_fallback():
    assert parse_config("chaos", flags={"out": "c"}, env={"TURBCLOUD_SEED": "9"}).seed == 9
    assert parse_config("chaos", flags={"out": "c", "seed": "3"}, env={"TURBCLOUD_SEED": "9"}).seed == 3
    with pytest.raises(ConfigError):
        parse_config("chaos", flags={"out": "c", "seed": "-1"}, env={})


def test_list_values():
    assert parse_config("chaos", flags={"out": "c", "ns": "8, 16,32"}, env={})["ns"] == [8, 16, 32]


# -- running ----------------------------------------------------------------

def test_disperse_smoke(tmp_path, capsys):
    out = tmp_path / "d.csv"
    code, stdout, _ = _run(["disperse", "--particles", "100", "--t-end", "1", "--dt", "0.01",
                            "--out", str(out), "--workers", "1"], capsys)
    assert code == 0
    assert json.loads(stdout)["config"]["particles"] == 100
    assert out.read_text().splitlines()[0] == "t,var_x,var_total"
    meta = json.loads((tmp_path / "d.csv.meta.json").read_text())
    assert meta["config"]["particles"] == 100 and meta["sources"]["particles"] == "flag"
    assert "version" in meta


def test_seventeen_digit_output(tmp_path, capsys):
    out = tmp_path / "h.csv"
    assert _run(["burgers", "--mode", "homogeneous", "--t-end", "0.01", "--out", str(out)], capsys)[0] == 0
    row = out.read_text().splitlines()[2].split(",")
    assert float(row[1]) == float(format(float(row[1]), ".17g"))
    assert any(len(v.replace("-", "").replace(".", "").lstrip("0")) >= 15 for v in row[1:])


def test_cfl_violation_exit_code(tmp_path, capsys):
    code, _, err = _run(["burgers", "--np", "8", "--reps", "1", "--dt", "0.01", "--t-end", "0.02",
                         "--out", str(tmp_path / "b.csv"), "--workers", "1"], capsys)
    assert code == 3
    assert "category=numerical-stability" in err and "admissible_dt=" in err and "module=burgers" in err


def test_unknown_flag_exit_code(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["sine1d", "--tau-q", "1", "--out", str(tmp_path / "s.csv")])
    assert exc.value.code == 2
    assert "key=tau_q" in capsys.readouterr().err


def test_missing_out_exit_code(capsys):
    code, _, err = _run(["sine1d"], capsys)
    assert code == 2 and "key=out" in err


def test_identical_runs_byte_identical(tmp_path, capsys):
    args = ["sine1d", "--t-end", "30", "--dt", "0.01", "--output-every", "0.1", "--transient", "5"]
    _run(args + ["--out", str(tmp_path / "a.csv")], capsys)
    _run(args + ["--out", str(tmp_path / "b.csv")], capsys)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_chaos_independent_of_workers(tmp_path, capsys):
    args = ["chaos", "--ns", "4,8,16", "--reps", "6", "--t-end", "0.05", "--dt", "0.01"]
    _run(args + ["--out", str(tmp_path / "a.csv"), "--workers", "1"], capsys)
    _run(args + ["--out", str(tmp_path / "b.csv"), "--workers", "2"], capsys)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    cols, footer = read_table(tmp_path / "a.csv")
    assert list(cols)[:4] == ["N", "mean_sq_coupling_dist", "w2sq_onepoint", "w2sq_pairs"]
    assert "mean_sq_coupling_dist_slope" in footer


def test_tsv_format(tmp_path, capsys):
    out = tmp_path / "h.tsv"
    _run(["burgers", "--mode", "homogeneous", "--t-end", "0.01", "--format", "tsv", "--out", str(out)], capsys)
    assert out.read_text().splitlines()[0].split("\t")[0] == "t"


def test_field_sample_and_eval(tmp_path, capsys):
    modes = tmp_path / "m.csv"
    assert _run(["field", "sample", "--n-modes", "20", "--out", str(modes)], capsys)[0] == 0
    grid = tmp_path / "g.csv"
    assert _run(["field", "eval", "--modes", str(modes), "--grid-n", "3", "--out", str(grid)], capsys)[0] == 0
    cols, _ = read_table(grid)
    assert list(cols) == ["x", "y", "z", "u_x", "u_y", "u_z"] and cols["x"].size == 27


def test_report_manifest(tmp_path, capsys):
    _run(["burgers", "--mode", "lagrangian", "--placement", "equispaced", "--np", "32", "--cells", "32",
          "--out", str(tmp_path / "hom.csv"), "--workers", "1"], capsys)
    _run(["sine1d", "--a", "0.5", "--t-end", "100", "--dt", "0.01", "--out", str(tmp_path / "s.csv")], capsys)
    rep = tmp_path / "manifest.csv"
    assert _run(["report", "--dir", str(tmp_path), "--out", str(rep)], capsys)[0] == 0
    lines = rep.read_text().splitlines()
    assert lines[0] == "claim,command,output,metric,value,threshold,status"
    claims = {line.split(",")[0]: line for line in lines[1:]}
    assert "homogeneous_limit" in claims and "one_sine_absorbing_band" in claims
    assert all(line.endswith("PASS") for line in lines[1:])


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "h.csv"
    proc = subprocess.run([sys.executable, "-m", "turbcloud.cli", "burgers", "--mode", "homogeneous",
                           "--t-end", "0.01", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()
