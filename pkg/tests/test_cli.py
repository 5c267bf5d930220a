import csv
import io
import json

import pytest
from scipy import stats

from pushasep.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, main, parse_args, read_config


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def csv_body(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    rows = list(csv.reader(io.StringIO("\n".join(lines))))
    return rows[0], rows[1:]


def header(text):
    return {l[2:].split(" = ")[0]: l.split(" = ", 1)[1] for l in text.splitlines()
            if l.startswith("# ") and " = " in l}


def reports(text):
    return {l.split(":", 1)[0][len("# report "):]: l.split(":", 1)[1].strip() for l in text.splitlines()
            if l.startswith("# report ")}


def test_green_table_matches_skellam(capsys):
    code, out, _ = run(["green", "--initial", "0", "--t", "1.0", "--R", "1", "--L", "1", "--range", "6"], capsys)
    assert code == EXIT_OK
    cols, rows = csv_body(out)
    assert cols == ["x1", "probability"]
    for x, p in rows:
        assert abs(float(p) - stats.skellam.pmf(int(x), 1.0, 1.0)) < 1e-12
    assert out.startswith("# version: ")
    assert "\r\n" in out


def test_green_with_oracle(capsys):
    code, out, _ = run(["green", "--initial", "0,-1", "--t", "0.5", "--range", "3", "--oracle", "true"], capsys)
    assert code == EXIT_OK
    cols, rows = csv_body(out)
    assert cols[-2:] == ["oracle", "diff"]
    assert max(abs(float(r[-1])) for r in rows) < 1e-6


@pytest.mark.parametrize("n1,t1,n2,t2", [(2, 1.0, 2, 1.0), (2, 1.0, 3, 0.5), (3, 0.4, 1, 1.2)])
def test_kernel_compare_general(n1, t1, n2, t2, capsys):
    code, out, _ = run(["kernel", "--n1", str(n1), "--t1", str(t1), "--n2", str(n2), "--t2", str(t2),
                        "--x1", "-3:-1", "--x2", "-2,0", "--compare-general", "true"], capsys)
    assert code == EXIT_OK
    cols, rows = csv_body(out)
    assert cols == ["x1", "x2", "value", "general", "diff"]
    assert len(rows) == 6
    assert max(abs(float(r[2])) for r in rows) > 1e-3
    assert max(abs(float(r[-1])) for r in rows) < 1e-10


def test_kernel_flat_correction_report(capsys):
    code, out, _ = run(["kernel", "--variant", "flat", "--x1", "0", "--x2", "0", "--correction", "10",
                        "--decay", "10:30", "--format", "json"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["columns"][-1] == "correction"
    assert 0.1 < doc["report"]["decay_rate"] < 0.25
    assert doc["header"]["config"]["variant"] == "flat"


def test_fredholm_discrete_and_mc(capsys):
    code, out, _ = run(["fredholm", "--points", "1:1.0,3:0.5", "--thresholds", "-1,-4",
                        "--replicas", "2000", "--seed", "5"], capsys)
    assert code == EXIT_OK
    rep = reports(out)
    val, mc, sd = float(rep["value"]), float(rep["mc"]), float(rep["mc_sigma"])
    assert abs(val - mc) < 4 * sd


def test_fredholm_continuum(capsys):
    code, out, _ = run(["fredholm", "--kind", "continuum", "--airy", "airy2", "--thresholds", "-1.5",
                        "--format", "json"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert 0 < doc["report"]["value"] < 1


def test_simulate_trajectory_and_chi2(tmp_path, capsys):
    traj = tmp_path / "t.jsonl"
    code, out, _ = run(["simulate", "--initial", "step:3", "--replicas", "3000", "--trajectory", str(traj),
                        "--chi2", "true", "--seed", "3"], capsys)
    assert code == EXIT_OK
    rep = reports(out)
    assert int(rep["exclusion_violations"]) == 0
    assert float(rep["chi2_pvalue"]) > 1e-3
    assert len(traj.read_text().splitlines()) == int(rep["events"])


def test_simulate_thresholds(capsys):
    code, out, _ = run(["simulate", "--initial", "flat:2:20", "--observe", "1:1.0,2:0.5",
                        "--thresholds", "-1e6,-1e6", "--replicas", "50"], capsys)
    assert code == EXIT_OK
    assert float(reports(out)["probability"]) == 1.0


def test_simulate_kpz_small(capsys):
    code, out, _ = run(["simulate", "--kpz", "5,10", "--replicas", "200", "--format", "json"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert [r[0] for r in doc["rows"]] == [5.0, 10.0]
    assert "slope" in doc["report"]


def test_limit_tables(capsys):
    code, out, _ = run(["limit", "--variant", "step", "--germ", "fixed:0", "--format", "json"], capsys)
    assert code == EXIT_OK
    assert abs(json.loads(out)["report"]["mu"] - 0.5310100564597888) < 1e-12
    code, out, _ = run(["limit", "--variant", "flat", "--Ts", "100,1000", "--u1", "0", "--u2", "1"], capsys)
    assert code == EXIT_OK
    cols, rows = csv_body(out)
    assert len(rows) == 2 and float(rows[1][1]) < float(rows[0][1])


def test_config_round_trip(tmp_path, capsys):
    first = tmp_path / "first.csv"
    assert main(["green", "--initial", "1,-1", "--t", "0.4", "--R", "2", "--L", "0.5", "--range", "2",
                 "--out", str(first)]) == EXIT_OK
    text = first.read_text()
    assert header(text)["command"] == "green"
    cfg = read_config(str(first))
    assert cfg["t"] == "0.40000000000000002" and cfg["initial"] == "1,-1"
    second = tmp_path / "second.csv"
    assert main(["--config", str(first), "--out", str(second)]) == EXIT_OK
    assert csv_body(second.read_text()) == csv_body(text)
    assert header(second.read_text()) == header(text)


def test_command_line_overrides_config(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("command = green\nt = 2.0\nR = 3\n")
    args = parse_args(["--config", str(cfg), "--t", "0.5"])
    assert args.t == 0.5 and args.R == 3.0


def test_options_before_subcommand():
    args = parse_args(["--seed", "7", "simulate", "--replicas", "10"])
    assert args.seed == 7 and args.replicas == 10


def test_invalid_input_exit_code(tmp_path, capsys):
    assert run(["simulate", "--R", "-1"], capsys)[0] == EXIT_INVALID
    assert run(["green", "--initial", "0,1"], capsys)[0] == EXIT_INVALID
    assert run(["limit", "--germ", "sideways:1"], capsys)[0] == EXIT_INVALID
    bad = tmp_path / "bad.txt"
    bad.write_text("command = green\nnonsense = 1\n")
    code, _, err = run(["--config", str(bad)], capsys)
    assert code == EXIT_INVALID and "nonsense" in err
    with pytest.raises(SystemExit) as e:
        main(["green", "--bogus"])
    assert e.value.code == 2


def test_numerical_failure_exit_code(capsys):
    # a zero tolerance can never be met by the window doubling
    code, _, err = run(["fredholm", "--tol", "0"], capsys)
    assert code == EXIT_NUMERICAL and "numerical failure" in err


def test_json_large_integers_are_strings(capsys):
    code, out, _ = run(["simulate", "--seed", str(2 ** 60), "--replicas", "5", "--format", "json"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["header"]["seed"] == str(2 ** 60)
