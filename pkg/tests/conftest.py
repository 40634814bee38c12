"""Shared instance generators for the randomized differential tests."""

import numpy as np

from markmle.data import Observation


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance criterion verdicts after the run, uncaptured."""
    try:
        from test_acceptance import CRITERION_LINES
    except ImportError:
        return
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)


def random_observations(rng, n_max=40, k_max=3, allow_duplicates=True,
                        time_pool=False):
    """Random dataset with one shared k; continuous marks.

    With time_pool, observation times are drawn from a small shared pool so
    exact ties in u (and censoring times equal to event endpoints) are
    common. Marks stay continuous draws: the fast maximal-intersection path
    assumes distinct marks per line, which is the model's own assumption.
    """
    n = int(rng.integers(1, n_max + 1))
    k = int(rng.integers(1, k_max + 1))
    pool = rng.random(max(4, n // 3)) * 2.0 + 0.002
    obs = []
    while len(obs) < n:
        if time_pool and rng.random() < 0.5 and len(pool) >= k:
            times = np.sort(rng.choice(pool, size=k, replace=False))
        else:
            times = np.sort(rng.random(k) * 2.0 + 0.001)
        if len(set(times.tolist())) < k:
            continue
        j = int(rng.integers(1, k + 2))
        mark = float(rng.random()) if j <= k else None
        obs.append(Observation(times=tuple(times.tolist()), delta_index=j,
                               mark=mark))
        if allow_duplicates and rng.random() < 0.05:
            obs.append(obs[-1])
    return obs


def hand_instance_n3():
    """Current-status records with (U, delta+) = (1,1), (2,0), (3,1).

    The fitted masses are 1/3 on (0,1]x{0.5} and 2/3 on (2,3]x{1.5}: the
    event at u=3 has interval (0,3], which the censoring at 2 trims to
    (2,3].
    """
    return [
        Observation(times=(1.0,), delta_index=1, mark=0.5),
        Observation(times=(2.0,), delta_index=2),
        Observation(times=(3.0,), delta_index=1, mark=1.5),
    ]
