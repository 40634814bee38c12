"""Primary acceptance gate: one test and one printed verdict per criterion.

Each test computes its quantities, appends a single "criterion N: PASS/FAIL"
line to CRITERION_LINES (echoed after the run by the conftest summary hook),
and then asserts. Criterion 7's second clause does not hold for this design
(the k = 25 hazard gap is 0.074, see the README); the test states the bound
anyway and fails honestly rather than loosening it.

Criterion 12 (figure rendering) belongs to the separate figures package and
is exercised by its own test suite.
"""

import math
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize

from conftest import random_observations
from markmle.consistency import bias_vs_k_study
from markmle.data import Observation, order_dataset
from markmle.limits import (
    DEFAULT_QUADRATURE,
    make_evaluation_window,
    pop_Flim,
    pop_FXlim,
)
from markmle.maxint import (
    brute_force_maximal_intersections,
    maximal_intersections,
    observed_sets,
)
from markmle.models import example_info
from markmle.plmle import (
    MassVector,
    fit_imputed_masses,
    fit_masses,
    impute_right_endpoints,
    log_likelihood,
    product_limit_masses,
)
from markmle.repaired import MarkGrid, discretize_marks, fit_cr_mle
from markmle.simulate import DEFAULT_CURVES, ExampleSpec, StudyConfig, run_study

CRITERION_LINES: list[str] = []


def _record(num: int, ok: bool, detail: str) -> str:
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    CRITERION_LINES.append(line)
    print(line)
    return line


def _fit(observations):
    ordered = order_dataset(observations)
    return ordered, fit_masses(ordered, maximal_intersections(ordered))


def test_criterion_1_no_censoring_degeneracy():
    """All events with distinct times: every mass is 1/n, exactly in
    rational arithmetic and to 1e-15 in floats."""
    rng = np.random.default_rng(1)
    worst = 0.0
    rational_ok = True
    for n in list(range(1, 21)) + [137]:
        if n <= 20:
            exact, tail = product_limit_masses([1] * n, one=Fraction(1))
            rational_ok &= tail == 0 and all(
                m == Fraction(1, n) for m in exact
            )
        times = np.sort(rng.choice(np.arange(1, 10 * n), size=n,
                                   replace=False)).astype(float)
        obs = [
            Observation(times=(t,), delta_index=1, mark=float(rng.random()))
            for t in times
        ]
        _, masses = _fit(obs)
        assert masses.censored_tail == 0.0
        worst = max(worst, max(abs(p - 1.0 / n)
                               for p in masses.probabilities))
    ok = rational_ok and worst < 1e-15
    detail = (f"uncensored masses equal 1/n (rational exact for n <= 20, "
              f"max float dev {worst:.2e})")
    _record(1, ok, detail)
    assert ok, detail


def _structure_matrix(ordered, masses):
    """0/1 incidence of likelihood terms on support components.

    Event rank i reads only its own segment's mass; censored rank i reads
    every segment strictly above its time (equivalently, with first source
    rank after i, since censored lefts fold into d) plus the tail.
    """
    segs = masses.segments
    has_tail = masses.censored_tail > 0.0 or not ordered.delta_plus[-1]
    m = len(segs) + (1 if has_tail else 0)
    seg_of_rank = {}
    for si, seg in enumerate(segs):
        for rank in seg.source_ranks:
            seg_of_rank[rank] = si
    first_rank = [seg.source_ranks[0] for seg in segs]
    mat = np.zeros((ordered.n, m))
    for i in range(1, ordered.n + 1):
        if ordered.delta_plus[i - 1]:
            mat[i - 1, seg_of_rank[i]] = 1.0
        else:
            for si, fr in enumerate(first_rank):
                if fr > i:
                    mat[i - 1, si] = 1.0
            if has_tail:
                mat[i - 1, m - 1] = 1.0
    return mat, has_tail


def test_criterion_2_likelihood_optimality_oracle():
    """The closed-form fit is never beaten by a generic simplex maximizer
    (to 1e-6) nor by 10^4 random feasible points (to 1e-8)."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(20260814)
    worst_opt = math.inf
    worst_rand = math.inf
    for trial in range(200):
        n = int(rng.integers(1, 7))
        k = int(rng.integers(1, 3))
        obs = []
        for _ in range(n):
            times = ()
            while len(times) < k:
                times = tuple(sorted(set(
                    float(np.round(t + 0.01, 6)) for t in rng.random(k)
                )))
            j = int(rng.integers(1, k + 2))
            mark = float(np.round(rng.random(), 6)) if j <= k else None
            obs.append(Observation(times=times, delta_index=j, mark=mark))
        ordered, fit = _fit(obs)
        ll_fit = log_likelihood(fit, ordered)
        mat, has_tail = _structure_matrix(ordered, fit)
        m = mat.shape[1]

        def neg(yvec):
            p = np.exp(yvec - yvec.max())
            p /= p.sum()
            vals = mat @ p
            if np.any(vals <= 0.0):
                return 1e12
            return -float(np.sum(np.log(vals)))

        res = minimize(neg, np.zeros(m), method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12,
                                "maxiter": 4000})
        worst_opt = min(worst_opt, ll_fit - (-res.fun))
        pts = rng.dirichlet(np.ones(m), size=10_000)
        lls = np.sum(np.log(np.clip(pts @ mat.T, 1e-300, None)), axis=1)
        worst_rand = min(worst_rand, ll_fit - float(lls.max()))
        if trial < 10:
            # the batch evaluator itself is checked against the module's
            for row in pts[:3]:
                mv = MassVector(
                    segments=fit.segments,
                    probabilities=tuple(row[:len(fit.segments)]),
                    censored_tail=float(row[-1]) if has_tail else 0.0,
                    u_last=fit.u_last,
                )
                direct = log_likelihood(mv, ordered)
                batch = float(np.sum(np.log(np.clip(mat @ row, 1e-300,
                                                    None))))
                assert abs(direct - batch) < 1e-9
    elapsed = time.perf_counter() - t0
    ok = worst_opt >= -1e-6 and worst_rand >= -1e-8 and elapsed < 60.0
    detail = (f"fit beats simplex optimizer by >= {worst_opt:.2e} and "
              f"10^4 random points by >= {worst_rand:.2e} on 200 instances "
              f"({elapsed:.1f}s)")
    _record(2, ok, detail)
    assert ok, detail


def test_criterion_3_maximal_intersection_oracle():
    """Fast sweep equals the quadratic height-map brute force, as sets,
    on 1000 random instances with n up to 500."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    for i in range(1000):
        obs = random_observations(rng, n_max=500, time_pool=bool(i % 2))
        ordered = order_dataset(obs)
        fast = sorted(m.geometry() for m in maximal_intersections(ordered))
        slow = sorted(
            m.geometry()
            for m in brute_force_maximal_intersections(observed_sets(ordered))
        )
        assert fast == slow
    elapsed = time.perf_counter() - t0
    ok = elapsed < 60.0
    detail = (f"fast = brute force on 1000 instances, n <= 500, exact set "
              f"equality ({elapsed:.1f}s)")
    _record(3, ok, detail)
    assert ok, detail


def test_criterion_4_closed_form_limit_example_1():
    """Example 1 marginal limit: quadrature against 1 - e^x sqrt(1-2x).
    The printed reference value at x = 0.25 is 1 - e^0.25 sqrt(0.5) =
    0.0920569..., checked to 1e-5."""
    t0 = time.perf_counter()
    model = example_info(1).model
    xs = tuple(0.05 * i for i in range(1, 10))
    window = make_evaluation_window(model, tau=0.45, grid=xs,
                                    config=DEFAULT_QUADRATURE)
    worst = 0.0
    at_quarter = None
    for x in xs:
        val = pop_FXlim(model, window, x)
        closed = 1.0 - math.exp(x) * math.sqrt(1.0 - 2.0 * x)
        worst = max(worst, abs(val - closed))
        if x == 0.25:
            at_quarter = val
    elapsed = time.perf_counter() - t0
    ok = (worst <= 1e-6
          and abs(at_quarter - 0.09205692064421567) <= 1e-5
          and elapsed < 10.0)
    detail = (f"quadrature matches closed form to {worst:.2e} on "
              f"x in 0.05..0.45; value at 0.25 is {at_quarter:.8f} "
              f"({elapsed:.1f}s)")
    _record(4, ok, detail)
    assert ok, detail


def test_criterion_5_inconsistency_reproduction():
    """Example 1 at n = 10^4, seed 42: the fitted marginal hugs the limit
    curve (sup gap <= 0.03) yet misses the truth at 0.25 by >= 0.10."""
    t0 = time.perf_counter()
    res = run_study(
        StudyConfig(example=ExampleSpec(example_id=1, n=10_000, seed=42))
    )
    from markmle.plmle import eval_FX

    est_quarter = eval_FX(res.masses, 0.25, "lower")
    truth_quarter = example_info(1).model.f0_marg_x(0.25)
    miss = abs(est_quarter - truth_quarter)
    elapsed = time.perf_counter() - t0
    ok = (res.sup_marginal_gap <= 0.03 and miss >= 0.10 and elapsed < 30.0)
    detail = (f"sup |est - limit| = {res.sup_marginal_gap:.4f} <= 0.03 and "
              f"|est(0.25) - truth(0.25)| = {miss:.4f} >= 0.10 "
              f"({elapsed:.1f}s)")
    _record(5, ok, detail)
    assert ok, detail


def test_criterion_6_repaired_consistency():
    """The mark-grid estimator with K = 20 on [0, 4] stays within 0.05 of
    the true joint law on x in {0.1,...,0.4} at n = 10^4, seed 42."""
    t0 = time.perf_counter()
    res = run_study(StudyConfig(
        example=ExampleSpec(example_id=1, n=10_000, seed=42),
        x_grid=(0.1, 0.2, 0.3, 0.4),
        include=frozenset(DEFAULT_CURVES | {"repaired"}),
        mark_grid_k=20,
    ))
    elapsed = time.perf_counter() - t0
    ok = res.sup_repaired_gap <= 0.05 and elapsed < 120.0
    detail = (f"max |repaired - truth| over the x,y grid = "
              f"{res.sup_repaired_gap:.4f} <= 0.05 ({elapsed:.1f}s)")
    _record(6, ok, detail)
    assert ok, detail


def test_criterion_7_hazard_gap_ladder():
    """More inspection times shrink the marginal hazard gap at x = 0.5
    monotonically, but k = 25 still leaves a gap of 0.074, so the stated
    bound of 0.05 cannot hold; the assertion states it anyway."""
    t0 = time.perf_counter()
    rows = bias_vs_k_study(lambda x: min(max(x, 0.0), 1.0), theta=1.0,
                           k_list=(1, 2, 5, 10, 25), x_list=(0.5,))
    gaps = [r.gap for r in sorted(rows, key=lambda r: r.k)]
    elapsed = time.perf_counter() - t0
    decreasing = all(a > b for a, b in zip(gaps, gaps[1:]))
    ok = decreasing and gaps[-1] < 0.05 and elapsed < 30.0
    ladder = ", ".join(f"{g:.6f}" for g in gaps)
    detail = (f"gap ladder over k in (1,2,5,10,25): {ladder}; strictly "
              f"decreasing: {decreasing}; final < 0.05: {gaps[-1] < 0.05} "
              f"({elapsed:.1f}s)")
    _record(7, ok, detail)
    assert ok, detail


def test_criterion_8_product_form():
    """Example 1 joint limit factorizes: the ratio-route quadrature equals
    the marginal limit times the exponential mark law on a 10x10 grid."""
    model = example_info(1).model
    xs = tuple(0.04 * i for i in range(1, 11))
    ys = tuple(0.4 * j for j in range(1, 11))
    window = make_evaluation_window(model, tau=0.45, grid=xs,
                                    config=DEFAULT_QUADRATURE)
    worst = 0.0
    for x in xs:
        marg = pop_FXlim(model, window, x)
        for y in ys:
            joint = pop_Flim(model, window, x, y, route="ratio")
            worst = max(worst, abs(joint - marg * (1.0 - math.exp(-y))))
    ok = worst <= 1e-6
    detail = (f"|joint limit - marginal x mark factor| <= {worst:.2e} "
              f"on the 10x10 grid")
    _record(8, ok, detail)
    assert ok, detail


def test_criterion_9_imputed_refit_equivalence():
    """Treating each event's right endpoint as exact and refitting gives
    the same masses, bitwise, grouped by (location, mark)."""
    rng = np.random.default_rng(99)
    for _ in range(100):
        ordered, masses = _fit(random_observations(rng, time_pool=True))
        points, tail = fit_imputed_masses(impute_right_endpoints(ordered))
        assert tail == masses.censored_tail
        by_loc: dict[tuple, float] = {}
        for u, mark, p in points:
            by_loc[(u, mark)] = by_loc.get((u, mark), 0.0) + p
        by_seg: dict[tuple, float] = {}
        for seg, p in zip(masses.segments, masses.probabilities):
            by_seg[(seg.r, seg.mark)] = by_seg.get((seg.r, seg.mark), 0.0) + p
        assert by_loc == by_seg
    ok = True
    detail = "imputed refit equals the fit exactly on 100 random instances"
    _record(9, ok, detail)
    assert ok


def test_criterion_10_em_correctness():
    """EM hand checks: the two-record instance splits mass 0.5/0.5 (brute
    force over the one-dimensional family confirms), and on a three-cell
    instance EM matches an exhaustive simplex grid to 1e-5 log-likelihood.
    Monotonicity is asserted inside the fit on every iteration."""
    grid = MarkGrid(cutpoints=(1.0,))
    two = [
        Observation(times=(1.0,), delta_index=1, mark=0.3),
        Observation(times=(2.0,), delta_index=2),
    ]
    est2 = fit_cr_mle(discretize_marks(two, grid))
    cell_mass = est2.risk_cells[0][0][2]
    ok_two = (abs(cell_mass - 0.5) < 1e-6 and abs(est2.tail_mass - 0.5) < 1e-6
              and est2.converged)

    four = [
        Observation(times=(1.0, 3.0), delta_index=1, mark=0.5),
        Observation(times=(0.5, 2.5), delta_index=2, mark=0.8),
        Observation(times=(1.0, 3.0), delta_index=2, mark=1.5),
        Observation(times=(0.7, 1.2), delta_index=3),
    ]
    crdata = discretize_marks(four, grid)

    def loglik(m1, m2, m3):
        if min(m1, m1 + m2, m3, m2 + m3) <= 0.0:
            return -math.inf
        return (math.log(m1) + math.log(m1 + m2)
                + math.log(m3) + math.log(m2 + m3))

    steps = 500
    best = -math.inf
    for i in range(steps + 1):
        for j in range(steps + 1 - i):
            best = max(best, loglik(i / steps, j / steps,
                                    1.0 - i / steps - j / steps))
    est4 = fit_cr_mle(crdata)
    ok_grid = est4.converged and est4.final_loglik >= best - 1e-5

    rng = np.random.default_rng(31)
    mark_grid = MarkGrid.equidistant(3, 0.0, 1.0)
    for _ in range(25):
        obs = random_observations(rng, n_max=30, time_pool=True)
        fit_cr_mle(discretize_marks(obs, mark_grid))

    ok = ok_two and ok_grid
    detail = (f"two-record masses ({cell_mass:.6f}, {est2.tail_mass:.6f}); "
              f"EM log-lik {est4.final_loglik:.6f} vs simplex grid best "
              f"{best:.6f}; monotone on 25 random instances")
    _record(10, ok, detail)
    assert ok, detail


def test_criterion_11_consistency_checker_cli():
    """`check --example 1` prints the limit and true marginal hazards at
    x = 0.25 (0.09657 vs 0.28768) and the inconsistent verdict."""
    proc = subprocess.run(
        [sys.executable, "-m", "markmle.cli", "check", "--example", "1"],
        capture_output=True, text=True,
    )
    lines = proc.stdout.strip().splitlines()
    row = next(l for l in lines if l.startswith("0.25,"))
    _, lim, tru, _ = (float(tok) for tok in row.split(","))
    verdict = lines[-1]
    ok = (proc.returncode == 0
          and abs(lim - 0.09657) <= 1e-4
          and abs(tru - 0.28768) <= 1e-4
          and verdict == "verdict=inconsistent")
    detail = (f"limit hazard {lim:.5f} ~ 0.09657, truth {tru:.5f} ~ 0.28768, "
              f"{verdict}")
    _record(11, ok, detail)
    assert ok, detail
