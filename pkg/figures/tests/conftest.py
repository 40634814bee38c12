"""Session fixture: generate study CSVs once through the markmle CLI.

The figures package consumes the estimator only through its published CSV
files, so the fixtures shell out to the command line rather than import it.
"""

import subprocess
import sys

import pytest

EXAMPLES = (1, 2, 3, 4)


def run_markmle(*args):
    return subprocess.run(
        [sys.executable, "-m", "markmle.cli", *args],
        capture_output=True,
        text=True,
    )


@pytest.fixture(scope="session")
def study_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("studies")
    dirs = {}
    for ex in EXAMPLES:
        out = root / f"ex{ex}"
        proc = run_markmle(
            "simulate", "--example", str(ex), "--n", "250", "--seed", "4",
            "--repaired", "--grid-step", "0.05", "--out-dir", str(out),
        )
        assert proc.returncode == 0, proc.stderr
        dirs[ex] = out
    return dirs
