"""End-to-end command line runs in subprocesses: files, stdout, exit codes."""

import math
import os
import subprocess
import sys

import pytest

from markmle.formats import read_dataset, read_table
from markmle.simulate import ExampleSpec, gen_example

HAND_DATASET = "t1,j,z\n1.0,1,0.5\n2.0,2,\n3.0,1,1.5\n"


def run_cli(*args, env=None):
    return subprocess.run(
        [sys.executable, "-m", "markmle.cli", *args],
        capture_output=True,
        text=True,
        env=env,
    )


def test_fit_writes_exact_masses(tmp_path):
    """The three-record current-status instance has masses 1/3 and 2/3 as
    computed by the product recursion; the file carries their shortest
    round-trip decimal forms and no halfplane row."""
    data = tmp_path / "data.csv"
    data.write_text(HAND_DATASET)
    out = tmp_path / "masses.csv"
    marg = tmp_path / "marginal.csv"
    proc = run_cli("fit", "--input", str(data), "--output", str(out),
                   "--marginal", str(marg))
    assert proc.returncode == 0, proc.stderr
    assert out.read_text() == (
        "d,r,z,mass\n"
        "0.0,1.0,0.5,0.33333333333333326\n"
        "2.0,3.0,1.5,0.6666666666666667\n"
    )
    assert marg.read_text() == (
        "x,value\n"
        "1.0,0.33333333333333326\n"
        "3.0,1.0\n"
    )


def test_fit_upper_bound_marginal(tmp_path):
    """The upper bound jumps at segment left endpoints and counts the
    censored tail at the last observation time."""
    data = tmp_path / "data.csv"
    data.write_text("t1,j,z\n1.0,1,0.5\n2.0,2,\n")
    out = tmp_path / "masses.csv"
    marg = tmp_path / "upper.csv"
    proc = run_cli("fit", "--input", str(data), "--bound", "upper",
                   "--output", str(out), "--marginal", str(marg))
    assert proc.returncode == 0, proc.stderr
    assert marg.read_text() == "x,value\n0.0,0.5\n2.0,1.0\n"


def test_parse_error_exits_2(tmp_path):
    data = tmp_path / "empty.csv"
    data.write_text("")
    proc = run_cli("fit", "--input", str(data), "--output",
                   str(tmp_path / "out.csv"))
    assert proc.returncode == 2
    assert "parse error" in proc.stderr
    assert "line 1" in proc.stderr


def test_missing_input_file_exits_2(tmp_path):
    proc = run_cli("fit", "--input", str(tmp_path / "nope.csv"),
                   "--output", str(tmp_path / "out.csv"))
    assert proc.returncode == 2
    assert "i/o error" in proc.stderr


def test_invariant_violation_exits_3(tmp_path):
    """A censored record carrying a mark is well-formed CSV but breaks a
    data rule; the diagnostic names the offending data row."""
    data = tmp_path / "data.csv"
    data.write_text("t1,j,z\n1.0,1,0.5\n2.0,2,0.9\n")
    proc = run_cli("fit", "--input", str(data), "--output",
                   str(tmp_path / "out.csv"))
    assert proc.returncode == 3
    assert "invariant violation" in proc.stderr
    assert "row 2" in proc.stderr


def test_window_violation_exits_4(tmp_path):
    """Example 1 inspects on (0, 0.5], so H(0.5) = 1 and a window ending
    there has no margin for the limit formulas."""
    proc = run_cli("limit", "--example", "1", "--tau", "0.5",
                   "--output", str(tmp_path / "lim"))
    assert proc.returncode == 4
    assert "numeric failure" in proc.stderr
    assert "H(0.5)" in proc.stderr


def test_bad_subcommand_exits_2():
    proc = run_cli("frobnicate")
    assert proc.returncode == 2


def test_check_model_usage_errors(tmp_path):
    proc = run_cli("check", "--model", "nosuchmodule:thing", "--tau", "0.4")
    assert proc.returncode == 2
    assert "usage error" in proc.stderr

    proc = run_cli("check", "--model", "markmle:formats", "--tau", "0.4")
    assert proc.returncode == 2
    assert "did not resolve" in proc.stderr

    proc = run_cli("check", "--model", "markmle.models:example_info",
                   "--tau", "0.4")
    assert proc.returncode == 2
    assert "model factory" in proc.stderr


def test_check_model_requires_tau():
    proc = run_cli("check", "--model", "markmle:formats")
    assert proc.returncode == 2
    assert "--tau is required" in proc.stderr


def test_check_example_reports_inconsistency(tmp_path):
    """The limit hazard of example 1 at x = 0.25 is 0.0966 against the true
    0.2877, a gap near 0.1911, and the verdict line flags the model."""
    proc = run_cli("check", "--example", "1")
    assert proc.returncode == 0, proc.stderr
    lines = proc.stdout.strip().splitlines()
    assert lines[0] == "example=1"
    assert lines[1] == "x,limit_hazard_x,truth_hazard_x,gap"
    row = next(l for l in lines if l.startswith("0.25,"))
    _, lim, tru, gap = (float(tok) for tok in row.split(","))
    assert lim == pytest.approx(0.09657359027997264, abs=1e-4)
    assert tru == pytest.approx(-math.log(0.75), abs=1e-12)
    assert gap == pytest.approx(0.19110848217180832, abs=1e-4)
    assert lines[-1] == "verdict=inconsistent"


def test_check_custom_model_factory(tmp_path):
    """--model imports MODULE:ATTRIBUTE from the path; a zero-argument
    factory returning the population model is accepted."""
    (tmp_path / "toymodel.py").write_text(
        "from markmle.models import example_info\n"
        "def build():\n"
        "    return example_info(1).model\n"
    )
    env = dict(os.environ)
    env["PYTHONPATH"] = str(tmp_path) + os.pathsep + env.get("PYTHONPATH", "")
    proc = run_cli("check", "--model", "toymodel:build", "--tau", "0.45",
                   "--marks", "1.0,2.0", env=env)
    assert proc.returncode == 0, proc.stderr
    lines = proc.stdout.strip().splitlines()
    assert lines[0] == "model=toymodel:build"
    assert lines[-1] == "verdict=inconsistent"


@pytest.mark.slow
def test_limit_tables_marginal_value(tmp_path):
    """With a 0.05 grid the marginal limit table of example 1 contains
    x = 0.25 whose value is 1 - e^0.25 sqrt(0.5)."""
    out = tmp_path / "lim"
    proc = run_cli("limit", "--example", "1", "--grid-step", "0.05",
                   "--tau", "0.45", "--output", str(out))
    assert proc.returncode == 0, proc.stderr
    header, rows = read_table(out / "marginal.csv")
    assert header == ("x", "value")
    assert [r[0] for r in rows] == [0.05 * i for i in range(1, 10)]
    at_quarter = dict(rows)[0.25]
    assert at_quarter == pytest.approx(0.09205692064421567, abs=1e-12)
    sheader, srows = read_table(out / "surface.csv")
    assert sheader == ("x", "y", "value")
    assert len(srows) == 9 * 80


def test_repair_writes_all_risk_anchors(tmp_path):
    data = tmp_path / "data.csv"
    data.write_text(HAND_DATASET)
    out = tmp_path / "risks.csv"
    proc = run_cli("repair", "--input", str(data), "--grid-k", "20",
                   "--grid-min", "0", "--grid-max", "4",
                   "--output", str(out))
    assert proc.returncode == 0, proc.stderr
    header, rows = read_table(out)
    assert header == ("risk", "x", "value")
    risks = {int(r[0]) for r in rows}
    assert risks == set(range(1, 22))
    finals = {j: 0.0 for j in range(1, 22)}
    for risk, _, value in rows:
        j = int(risk)
        finals[j] = max(finals[j], value)
    assert math.fsum(finals.values()) == pytest.approx(1.0, abs=1e-9)


def test_simulate_is_byte_deterministic(tmp_path):
    args = ("simulate", "--example", "1", "--n", "50", "--seed", "9",
            "--repaired", "--mark-grid-k", "5")
    dir_a = tmp_path / "a"
    dir_b = tmp_path / "b"
    proc_a = run_cli(*args, "--out-dir", str(dir_a))
    proc_b = run_cli(*args, "--out-dir", str(dir_b))
    assert proc_a.returncode == 0, proc_a.stderr
    assert proc_b.returncode == 0, proc_b.stderr
    names = [
        "dataset.csv", "marginal.csv", "slice.csv", "summary.csv",
        "repaired_steps.csv", "repaired_surface.csv", "repaired_slice.csv",
    ]
    for name in names:
        assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes()
    back = read_dataset(dir_a / "dataset.csv")
    assert back == list(gen_example(ExampleSpec(example_id=1, n=50, seed=9)))
