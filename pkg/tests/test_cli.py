import json

import pytest

from evoctrl import cli, formats, theory
from evoctrl.cli import EXIT_RESUME_MISMATCH, EXIT_SIZE_GUARD, EXIT_USAGE


def invoke(*argv):
    return cli.main(list(argv))


def read(path):
    return formats.read_csv(str(path))


def column(header, rows, name):
    idx = header.index(name)
    return [row[idx] for row in rows]


def test_run_single_bit_problem(tmp_path):
    out = tmp_path / "run.csv"
    code = invoke("run", "--problem", "onemax", "--n", "1", "--algo", "rls",
                  "--runs", "100", "--seed", "1", "--threads", "1",
                  "--output", str(out))
    assert code == 0
    meta, header, rows = read(out)
    assert meta["tool"] == "evoctrl" and meta["command"] == "run"
    assert meta["seed"] == "1" and meta["budget"] == "100"
    assert len(rows) == 1
    assert float(column(header, rows, "mean")[0]) <= 2.0
    assert column(header, rows, "budget_exceeded")[0] == "0"


def test_run_symbolic_rate_is_resolved_in_metadata(tmp_path):
    out = tmp_path / "run.csv"
    code = invoke("run", "--problem", "leadingones", "--n", "50", "--algo",
                  "ea-gt0", "--p0", "1/n", "--runs", "5", "--seed", "2",
                  "--threads", "1", "--output", str(out))
    assert code == 0
    meta, header, rows = read(out)
    assert float(meta["p0"]) == 0.02
    assert float(column(header, rows, "p0")[0]) == 0.02


def test_run_byte_identical_reruns(tmp_path):
    args = ("run", "--problem", "leadingones", "--n", "40", "--algo",
            "ea-alpha", "--A", "1.5", "--b", "0.6", "--runs", "20",
            "--seed", "3")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert invoke(*args, "--threads", "1", "--output", str(a)) == 0
    assert invoke(*args, "--threads", "2", "--output", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()


def test_run_per_run_output(tmp_path):
    out, per = tmp_path / "s.csv", tmp_path / "p.csv"
    assert invoke("run", "--problem", "onemax", "--n", "20", "--algo", "rls",
                  "--runs", "7", "--seed", "4", "--threads", "1",
                  "--output", str(out), "--per-run", str(per)) == 0
    meta, header, rows = read(per)
    assert header == ["run", "evaluations_to_optimum", "total_evaluations"]
    assert len(rows) == 7
    assert [r[0] for r in rows] == [str(i) for i in range(7)]


def test_run_flag_validation():
    base = ("run", "--problem", "onemax", "--n", "10", "--runs", "2",
            "--seed", "1", "--threads", "1")
    assert invoke(*base, "--algo", "ea-alpha") == EXIT_USAGE
    assert invoke(*base, "--algo", "ea-alpha", "--A", "1.2") == EXIT_USAGE
    assert invoke(*base, "--algo", "rls", "--A", "1.2") == EXIT_USAGE
    assert invoke(*base, "--algo", "ea-gt0", "--b", "0.5") == EXIT_USAGE
    assert invoke(*base, "--algo", "ea-alpha", "--A", "0.5", "--b",
                  "0.5") == EXIT_USAGE
    assert invoke(*base, "--algo", "ea-gt0", "--p0", "2/n") == EXIT_USAGE
    # variant/problem mismatch is a configuration error -> usage exit code
    assert invoke(*base, "--algo", "rls-opt-lo") == EXIT_USAGE


def test_run_bad_flag_exits_two(capsys):
    with pytest.raises(SystemExit) as err:
        invoke("run", "--problem", "sudoku", "--n", "5", "--algo", "rls",
               "--runs", "1", "--seed", "1")
    assert err.value.code == EXIT_USAGE


def test_theory_kopt_lo_values(capsys):
    assert invoke("theory", "kopt-lo", "--n", "500", "--f", "0") == 0
    out = capsys.readouterr().out
    lines = [l for l in out.splitlines() if not l.startswith("#")]
    assert lines[0] == "f,kopt"
    assert lines[1] == "0,500"


def test_theory_rls_lo(capsys):
    assert invoke("theory", "rls-lo", "--n", "1000") == 0
    out = capsys.readouterr().out
    assert "1000,500001.0" in out


def test_theory_fixed_target(capsys):
    assert invoke("theory", "fixed-target-lo", "--n", "100", "--i", "100") == 0
    out = capsys.readouterr().out
    value = float(out.splitlines()[-1].split(",")[1])
    assert value == pytest.approx(3882.9357654, abs=1e-3)


def test_theory_tables_to_file(tmp_path):
    out = tmp_path / "drift.csv"
    assert invoke("theory", "drift-om", "--n", "12", "--f", "3:5",
                  "--ell", "1:12", "--output", str(out)) == 0
    meta, header, rows = read(out)
    assert header == ["f", "ell", "drift"]
    assert len(rows) == 3 * 12
    drift = {(r[0], r[1]): float(r[2]) for r in rows}
    assert drift[("3", "1")] == pytest.approx(theory.onemax_drift(12, 3, 1))

    out2 = tmp_path / "prob.csv"
    assert invoke("theory", "prob-lo", "--n", "10", "--f", "4", "--ell",
                  "1:10", "--output", str(out2)) == 0
    _, header2, rows2 = read(out2)
    assert float(rows2[0][2]) == pytest.approx(0.1)


def test_theory_rejects_unknown_table():
    with pytest.raises(SystemExit) as err:
        invoke("theory", "entropy", "--n", "10")
    assert err.value.code == EXIT_USAGE


def test_grid_degenerate_single_cell(tmp_path):
    grid_out = tmp_path / "grid.csv"
    assert invoke("grid", "--problem", "leadingones", "--n", "30",
                  "--A-range", "1.2:1.2:0.1", "--b-range", "0.85:0.85:0.02",
                  "--runs-per-cell", "10", "--seed", "5", "--threads", "1",
                  "--output", str(grid_out)) == 0
    meta, header, rows = read(grid_out)
    assert header == ["A", "b", "runs", "mean", "median", "stddev", "min",
                      "max", "budget_exceeded_count"]
    assert len(rows) == 1
    assert rows[0][0] == "1.2" and rows[0][1] == "0.85"
    # same statistics semantics as a plain run of the same configuration
    run_out = tmp_path / "run.csv"
    assert invoke("run", "--problem", "leadingones", "--n", "30", "--algo",
                  "ea-alpha", "--A", "1.2", "--b", "0.85", "--runs", "200",
                  "--seed", "6", "--threads", "1", "--output",
                  str(run_out)) == 0
    _, rheader, rrows = read(run_out)
    grid_mean = float(column(header, rows, "mean")[0])
    run_mean = float(column(rheader, rrows, "mean")[0])
    run_std = float(column(rheader, rrows, "stddev")[0])
    assert abs(grid_mean - run_mean) <= 5 * run_std / (10 ** 0.5)


def test_grid_resume_completed_noop(tmp_path):
    out = tmp_path / "grid.csv"
    args = ("grid", "--problem", "leadingones", "--n", "25",
            "--A-range", "1.0:1.2:0.1", "--b-range", "0.6:0.8:0.1",
            "--runs-per-cell", "4", "--seed", "7", "--threads", "1",
            "--output", str(out))
    assert invoke(*args) == 0
    before = out.read_bytes()
    assert invoke(*args, "--resume", str(out)) == 0
    assert out.read_bytes() == before


def test_grid_resume_partial_file(tmp_path):
    out = tmp_path / "grid.csv"
    args = ("grid", "--problem", "leadingones", "--n", "25",
            "--A-range", "1.0:1.2:0.1", "--b-range", "0.6:0.8:0.1",
            "--runs-per-cell", "4", "--seed", "8", "--threads", "1",
            "--output", str(out))
    assert invoke(*args) == 0
    full = out.read_text()
    lines = full.splitlines(keepends=True)
    partial = tmp_path / "partial.csv"
    partial.write_text("".join(lines[:-4]) + lines[-4][: len(lines[-4]) // 2])
    assert invoke(*args, "--resume", str(partial)) == 0
    assert out.read_text() == full


def test_grid_resume_mismatch_exit_code(tmp_path):
    out = tmp_path / "grid.csv"
    args = ("grid", "--problem", "leadingones", "--n", "25",
            "--A-range", "1.0:1.0:0.1", "--b-range", "0.6:0.6:0.1",
            "--runs-per-cell", "2", "--threads", "1", "--output", str(out))
    assert invoke(*args, "--seed", "9") == 0
    assert invoke(*args, "--seed", "10", "--resume", str(out)) == \
        EXIT_RESUME_MISMATCH


def test_trace_outputs(tmp_path):
    jsonl = tmp_path / "trace.jsonl"
    agg = tmp_path / "agg.csv"
    n = 40
    assert invoke("trace", "--problem", "leadingones", "--n", str(n),
                  "--algo", "ea-alpha", "--A", "1.2", "--b", "0.85",
                  "--runs", "3", "--seed", "11", "--threads", "1",
                  "--jsonl", str(jsonl), "--aggregate", str(agg)) == 0
    records = [json.loads(line) for line in jsonl.read_text().splitlines()]
    assert records, "trace must not be empty"
    floor, cap = 1.0 / n**2, 0.5
    iters = {}
    for rec in records:
        assert set(rec) == {"run", "iter", "fitness", "ell", "p", "accepted"}
        assert floor <= rec["p"] <= cap
        assert rec["ell"] >= 1
        assert 0 <= rec["fitness"] < n
        assert isinstance(rec["accepted"], bool)
        iters.setdefault(rec["run"], []).append(rec["iter"])
    for run_iters in iters.values():
        assert run_iters == list(range(1, len(run_iters) + 1))
    meta, header, rows = read(agg)
    assert header == ["fitness", "mean_ell", "kopt", "iteration_count"]
    kopt = {int(r[0]): int(r[2]) for r in rows}
    for f, k in kopt.items():
        assert k == theory.optimal_step_leadingones(n, f)


def test_trace_size_guard(tmp_path):
    args = ("trace", "--problem", "onemax", "--n", "4", "--algo", "rls",
            "--runs", "1001", "--seed", "12", "--threads", "1",
            "--jsonl", str(tmp_path / "t.jsonl"),
            "--aggregate", str(tmp_path / "a.csv"))
    assert invoke(*args) == EXIT_SIZE_GUARD
    assert not (tmp_path / "t.jsonl").exists()
    assert invoke(*args, "--force") == 0
    assert (tmp_path / "t.jsonl").exists()


def _write_grid_csv(path, problem, n, rows):
    metadata = {"tool": "evoctrl", "version": "0.1.0", "command": "grid",
                "problem": problem, "n": n}
    header = ["A", "b", "runs", "mean", "median", "stddev", "min", "max",
              "budget_exceeded_count"]
    formats.write_csv(str(path), metadata, header, rows)


def test_fraction_exact_baseline(tmp_path, capsys):
    grid = tmp_path / "grid.csv"
    # baseline for n=10 is 1 + 100/2 = 51
    _write_grid_csv(grid, "leadingones", 10, [
        [1.1, 0.5, 4, 40.0, 40.0, 1.0, 39.0, 41.0, 0],
        [1.2, 0.5, 4, 45.0, 45.0, 1.0, 44.0, 47.0, 0],
        [1.3, 0.5, 4, 51.0, 51.0, 1.0, 50.0, 52.0, 0],
        [1.4, 0.5, 4, 60.0, 60.0, 1.0, 59.0, 61.0, 0],
    ])
    assert invoke("fraction", "--input", str(grid),
                  "--thresholds", "0,10,20") == 0
    out = capsys.readouterr().out
    lines = [l for l in out.splitlines() if not l.startswith("#")]
    assert lines[0] == "threshold_pct,fraction"
    values = {float(l.split(",")[0]): float(l.split(",")[1]) for l in lines[1:]}
    assert values[0.0] == pytest.approx(3 / 4)
    assert values[10.0] == pytest.approx(2 / 4)
    assert values[20.0] == pytest.approx(1 / 4)
    assert "# baseline: 51.0" in out


def test_fraction_box_filter(tmp_path, capsys):
    grid = tmp_path / "grid.csv"
    _write_grid_csv(grid, "leadingones", 10, [
        [1.1, 0.5, 4, 40.0, 40.0, 1.0, 39.0, 41.0, 0],
        [3.0, 0.9, 4, 40.0, 40.0, 1.0, 39.0, 41.0, 0],
    ])
    assert invoke("fraction", "--input", str(grid), "--thresholds", "0",
                  "--A-max", "2.5", "--b-min", "0.4", "--b-max", "0.8") == 0
    out = capsys.readouterr().out
    assert "# cells: 1" in out


def test_fraction_requires_explicit_baseline_for_onemax(tmp_path):
    grid = tmp_path / "grid.csv"
    _write_grid_csv(grid, "onemax", 10, [
        [1.1, 0.5, 4, 40.0, 40.0, 1.0, 39.0, 41.0, 0],
    ])
    assert invoke("fraction", "--input", str(grid)) == EXIT_USAGE
    assert invoke("fraction", "--input", str(grid), "--baseline", "50") == 0


def test_fraction_missing_column(tmp_path):
    bad = tmp_path / "bad.csv"
    formats.write_csv(str(bad), {"problem": "leadingones", "n": 10},
                      ["A", "b", "mean"], [[1.1, 0.5, 40.0]])
    assert invoke("fraction", "--input", str(bad)) == EXIT_USAGE


def test_console_script_installed():
    import shutil
    import subprocess

    exe = shutil.which("evoctrl")
    assert exe, "console script should be installed"
    proc = subprocess.run([exe, "theory", "rls-lo", "--n", "10"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "10,51.0" in proc.stdout


def test_csv_round_trip_exact_floats(tmp_path):
    path = tmp_path / "x.csv"
    values = [0.1, 1 / 3, 2.0 ** -40, 12345.6789, float("nan")]
    formats.write_csv(str(path), {"n": 3}, ["v"], [[v] for v in values])
    _, _, rows = read(path)
    parsed = [float(r[0]) for r in rows]
    for original, back in zip(values, parsed):
        assert (original != original and back != back) or original == back
