"""Acceptance suite for the default benchmark.

Default benchmark: built-in two-level family, unit circle about the
exceptional point (0, 1), start point (0, 0), 100 intervals. Each criterion
prints one [PASS]/[FAIL] line (run pytest with -s or -rA to see them all)
and enforces its runtime budget.
"""

import math
import time
import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from epsteer import (
    ConstraintSet,
    GaConfig,
    LoopEigensystems,
    LoopSpec,
    OptimizationProblem,
    ParameterPoint,
    PinningExemptionWarning,
    build_loop,
    chiral_index,
    chiral_targets,
    eigensystem,
    engagement,
    evaluate,
    ga_search,
    init_state,
    mode_projection,
    nonchiral_targets,
    optimize,
    optimized_time_runner,
    orient,
    proportions,
    regauge,
    run_trace,
    stable_schedule,
    stable_time_runner,
    step,
    time_to_purity,
    two_level_family,
    uniform_schedule,
    uniform_time_runner,
    weighted_eigenvalue,
)
from epsteer.evolution import EvolutionState, EvolutionTrace, TraceSample

EPS = ((0.0, 1.0), (0.0, -1.0))  # analytic exceptional points of the family


def _report(num: int, name: str, ok: bool, elapsed: float, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    extra = f" {detail}" if detail else ""
    print(f"[{status}] criterion {num}: {name} ({elapsed:.2f}s){extra}")


def _far_from_eps(x, y, radius=1e-6):
    return all(math.hypot(x - ex, y - ey) >= radius for ex, ey in EPS)


def _quadratic_oracle(mat):
    """Eigenvalues by the quadratic formula on the characteristic polynomial."""
    tr = mat[0, 0] + mat[1, 1]
    det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
    s = np.sqrt(tr * tr - 4.0 * det)
    return 0.5 * (tr + s), 0.5 * (tr - s)


def _bisect_uniform_total(cache_ccw, cache_cw, level):
    """Smallest uniform total time with conversion CCW and recovery CW >= level."""

    def ok(total):
        if total <= 0.0:
            return False
        sched = uniform_schedule(cache_ccw.n_intervals, total)
        zb = run_trace(cache_ccw, None, sched, "A").zeta_end[1]
        za = run_trace(cache_cw, None, sched, "A").zeta_end[0]
        return min(zb, za) >= level

    hi = 0.25
    while not ok(hi):
        hi *= 2.0
        assert hi < 1e6
    lo = hi / 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@pytest.fixture(scope="module")
def uniform_total(cache_ccw, cache_cw):
    return _bisect_uniform_total(cache_ccw, cache_cw, 0.9)


@pytest.fixture(scope="module")
def stable_result(cache_ccw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PinningExemptionWarning)
        return stable_schedule(cache_ccw, None, "A", 0.9, return_info=True)


def test_criterion_1_eigensystem_correctness(family):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_biorth = worst_recon = worst_eig = 0.0
    count = 0
    while count < 1000:
        x, y = rng.uniform(-2.0, 2.0, 2)
        if not _far_from_eps(x, y):
            continue
        count += 1
        mat = evaluate(family, (x, y))
        es = eigensystem(mat, point=(x, y))
        worst_biorth = max(
            worst_biorth,
            float(np.abs(es.left_covectors @ es.right_vectors - np.eye(2)).max()),
        )
        worst_recon = max(worst_recon, float(np.abs(es.reconstruct() - mat).max()))
        a, b = _quadratic_oracle(mat)
        err = min(
            max(abs(es.eigenvalues[0] - a), abs(es.eigenvalues[1] - b)),
            max(abs(es.eigenvalues[0] - b), abs(es.eigenvalues[1] - a)),
        )
        worst_eig = max(worst_eig, float(err))
    elapsed = time.perf_counter() - t0
    ok = worst_biorth <= 1e-10 and worst_recon <= 1e-9 and worst_eig <= 1e-12 and elapsed < 1.0
    _report(
        1,
        "eigensystem correctness",
        ok,
        elapsed,
        f"biorth={worst_biorth:.2e} recon={worst_recon:.2e} eig={worst_eig:.2e}",
    )
    assert worst_biorth <= 1e-10
    assert worst_recon <= 1e-9
    assert worst_eig <= 1e-12
    assert elapsed < 1.0


def test_criterion_2_propagator_oracle(family):
    rng = np.random.default_rng(4096)
    t0 = time.perf_counter()
    worst = 0.0
    count = 0
    while count < 1000:
        px, py = rng.uniform(-2.0, 2.0, 2)
        qx, qy = rng.uniform(-2.0, 2.0, 2)
        if not (_far_from_eps(px, py) and _far_from_eps(qx, qy)):
            continue
        count += 1
        dt = rng.uniform(0.0, 5.0)
        es_p = eigensystem(evaluate(family, (px, py)), point=(px, py))
        c = rng.normal(size=2) + 1j * rng.normal(size=2)
        state = EvolutionState(
            psi=es_p.right_vectors @ c, coeffs=c, step_index=0, eigensystem=es_p
        )
        next_mat = evaluate(family, (qx, qy))
        es_q = eigensystem(next_mat, point=(qx, qy))
        out = step(state, es_q, dt)
        oracle = expm(-1j * next_mat * dt) @ state.psi
        worst = max(worst, float(np.abs(out.psi - oracle).max() / np.abs(oracle).max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 5.0
    _report(2, "propagator equals matrix exponential", ok, elapsed, f"rel={worst:.2e}")
    assert worst <= 1e-9
    assert elapsed < 5.0


def test_criterion_3_chiral_baseline(cache_ccw, cache_cw, uniform_total):
    t0 = time.perf_counter()
    sched = uniform_schedule(cache_ccw.n_intervals, uniform_total)
    zeta_b_ccw = run_trace(cache_ccw, None, sched, "A").zeta_end[1]
    zeta_a_cw = run_trace(cache_cw, None, sched, "A").zeta_end[0]
    elapsed = time.perf_counter() - t0
    ok = zeta_b_ccw >= 0.9 and zeta_a_cw >= 0.9 and elapsed < 10.0
    _report(
        3,
        "uniform chiral baseline",
        ok,
        elapsed,
        f"T={uniform_total:.4f} ccw zeta_B={zeta_b_ccw:.4f} cw zeta_A={zeta_a_cw:.4f}",
    )
    assert zeta_b_ccw >= 0.9
    assert zeta_a_cw >= 0.9
    assert elapsed < 10.0


def test_criterion_4_stable_conversion(cache_ccw, cache_cw, uniform_total, stable_result):
    t0 = time.perf_counter()
    sched, trace, info = stable_result
    p1 = trace.p1()
    mask = engagement(sched, trace, 0.9)
    min_engaged = float(p1[mask].min())
    zeta_b_end = trace.zeta_end[1]
    # the only point outside the pinning guarantee is the degenerate-axis
    # closing point; no dwell was capped on this benchmark
    exemptions_ok = info.capped == () and info.exempt == (cache_ccw.n_intervals,)
    # uniform evolution needs more time both for the 0.9 baseline and for
    # the purity the stable schedule actually reaches
    t_match = _bisect_uniform_total(cache_ccw, cache_cw, zeta_b_end)
    elapsed = time.perf_counter() - t0
    ok = (
        min_engaged >= 0.9 - 1e-6
        and zeta_b_end >= 0.9
        and sched.total_time < uniform_total
        and sched.total_time < t_match
        and exemptions_ok
        and elapsed < 10.0
    )
    _report(
        4,
        "stable conversion",
        ok,
        elapsed,
        f"T={sched.total_time:.4f} minP1={min_engaged:.8f} zeta_B={zeta_b_end:.4f} "
        f"uniform_T={uniform_total:.4f}",
    )
    assert min_engaged >= 0.9 - 1e-6
    assert zeta_b_end >= 0.9
    assert sched.total_time < uniform_total
    assert sched.total_time < t_match
    assert exemptions_ok
    assert elapsed < 10.0


def test_criterion_5_bimodal_chiral_optimization(
    family, loop, cache_ccw, cache_cw, stable_result
):
    t0 = time.perf_counter()
    constraints = ConstraintSet(loop=loop, targets=chiral_targets(0.9))
    problem = OptimizationProblem(
        family, constraints, caches={"ccw": cache_ccw, "cw": cache_cw}
    )
    result = optimize(problem, GaConfig(seed=42))
    sched = result.schedule
    ci = {}
    for mode in ("A", "B"):
        t_ccw = run_trace(cache_ccw, None, sched, mode)
        t_cw = run_trace(cache_cw, None, sched.reversed(), mode)
        ci[mode] = chiral_index(t_ccw, t_cw)
    stable_total = stable_result[0].total_time
    elapsed = time.perf_counter() - t0
    ok = (
        result.feasible
        and result.total_time < stable_total
        and ci["A"] >= 0.9
        and ci["B"] >= 0.9
        and abs(ci["A"] - ci["B"]) <= 0.02
        and elapsed < 300.0
    )
    _report(
        5,
        "bimodal chiral optimization",
        ok,
        elapsed,
        f"T={result.total_time:.4f} (stable {stable_total:.4f}) "
        f"CI_A={ci['A']:.4f} CI_B={ci['B']:.4f}",
    )
    assert result.feasible
    assert result.total_time < stable_total
    assert ci["A"] >= 0.9 and ci["B"] >= 0.9
    assert abs(ci["A"] - ci["B"]) <= 0.02
    assert elapsed < 300.0


def test_criterion_6_nonchiral_conversion(family, loop, cache_ccw, cache_cw):
    t0 = time.perf_counter()
    constraints = ConstraintSet(loop=loop, targets=nonchiral_targets(0.9))
    problem = OptimizationProblem(
        family, constraints, caches={"ccw": cache_ccw, "cw": cache_cw}
    )
    result = optimize(problem, GaConfig(seed=42))
    elapsed = time.perf_counter() - t0
    ok = result.feasible and elapsed < 300.0
    _report(
        6,
        "non-chiral conversion",
        ok,
        elapsed,
        f"T={result.total_time:.4f} achieved={ {k: round(v, 4) for k, v in result.achieved.items()} }",
    )
    assert result.feasible
    assert all(v >= 0.9 for v in result.achieved.values())
    assert elapsed < 300.0


def test_criterion_7_speedup_ordering(family, loop, cache_ccw, cache_cw):
    t0 = time.perf_counter()
    grid = (0.8, 0.85, 0.9, 0.95)

    uniform_times = dict(
        time_to_purity(uniform_time_runner(cache_ccw, "A", "B"), grid)
    )
    stable_times = dict(time_to_purity(stable_time_runner(cache_ccw, "A", "B"), grid))

    def factory(pi):
        cs = ConstraintSet(loop=loop, targets=nonchiral_targets(pi))
        return OptimizationProblem(
            family, cs, caches={"ccw": cache_ccw, "cw": cache_cw}
        )

    optimized_times = dict(
        time_to_purity(optimized_time_runner(factory, GaConfig(seed=42)), grid)
    )

    ordered = all(
        optimized_times[pi] < stable_times[pi] < uniform_times[pi] for pi in grid
    )

    def monotone(times):
        seq = [times[pi] for pi in grid]
        return all(b >= a - 1e-3 * max(a, 1.0) for a, b in zip(seq, seq[1:]))

    mono = monotone(optimized_times) and monotone(stable_times) and monotone(uniform_times)
    ratio = optimized_times[0.9] / uniform_times[0.9]
    elapsed = time.perf_counter() - t0
    ok = ordered and mono and ratio <= 0.5 and elapsed < 600.0
    _report(
        7,
        "speedup ordering",
        ok,
        elapsed,
        f"ratio@0.9={ratio:.3f} optimized={ [round(optimized_times[p], 3) for p in grid] } "
        f"stable={ [round(stable_times[p], 3) for p in grid] } "
        f"uniform={ [round(uniform_times[p], 3) for p in grid] }",
    )
    assert ordered
    assert mono
    assert ratio <= 0.5
    assert elapsed < 600.0


def _random_safe_circle(rng):
    """A circle spec staying well clear of both exceptional points."""
    while True:
        cx = rng.uniform(-1.5, 1.5)
        cy = rng.uniform(-1.5, 1.5)
        r = rng.uniform(0.2, 1.2)
        clear = min(math.hypot(cx - ex, cy - ey) for ex, ey in EPS)
        if abs(clear - r) > 0.05 and min(abs(clear - r), clear) > 0.05:
            return LoopSpec(
                center=ParameterPoint(cx, cy), radii=(r, r), n_intervals=60
            )


def test_criterion_8_invariant_suite(family, loop, cache_ccw, cache_cw):
    t0 = time.perf_counter()
    rng = np.random.default_rng(777)

    # zero-dwell identity: 50 random loops x 4 (direction, mode) combinations
    for _ in range(50):
        spec = _random_safe_circle(rng)
        lp = build_loop(spec)
        for direction in ("ccw", "cw"):
            cache = LoopEigensystems.build(orient(lp, direction), family, ep_guard=False)
            zeros = np.zeros(cache.n_intervals)
            for mode in ("A", "B"):
                trace = run_trace(cache, None, zeros, mode)
                assert abs(trace.zeta_end[0] - trace.samples[0].zeta_a) < 1e-9
                assert abs(trace.zeta_end[1] - trace.samples[0].zeta_b) < 1e-9

    # gauge independence of P, omega_bar, zeta: 200 random re-gaugings
    sched = uniform_schedule(cache_ccw.n_intervals, 4.0)
    ref = run_trace(cache_ccw, None, sched, "A")
    for _ in range(200):
        systems = [
            regauge(es, np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, 2)))
            for es in cache_ccw.systems
        ]
        alt_cache = LoopEigensystems(
            cache_ccw.points, cache_ccw.dc, cache_ccw.direction, systems
        )
        alt = run_trace(alt_cache, None, sched, "A")
        for a, b in zip(ref.samples[::20], alt.samples[::20]):
            assert np.allclose(a.proportions, b.proportions, atol=1e-12)
            assert abs(a.omega_bar - b.omega_bar) < 1e-12
            assert abs(a.zeta_a - b.zeta_a) < 1e-12
        assert abs(ref.zeta_end[1] - alt.zeta_end[1]) < 1e-12

    # state-scale invariance: 200 random states
    basis = cache_ccw.mode_basis
    for _ in range(200):
        j = int(rng.integers(1, cache_ccw.n_points))
        es = cache_ccw.eigensystem_at(j)
        c = rng.normal(size=2) + 1j * rng.normal(size=2)
        s = rng.uniform(1e-3, 1e3)
        one = EvolutionState(
            psi=es.right_vectors @ c, coeffs=c, step_index=0, eigensystem=es
        )
        two = EvolutionState(
            psi=es.right_vectors @ (s * c), coeffs=s * c, step_index=0, eigensystem=es
        )
        assert np.allclose(proportions(one), proportions(two), atol=1e-12)
        assert abs(weighted_eigenvalue(one) - weighted_eigenvalue(two)) < 1e-12
        za1, zb1 = mode_projection(one, basis)
        za2, zb2 = mode_projection(two, basis)
        assert abs(za1 - za2) < 1e-12 and abs(zb1 - zb2) < 1e-12

    # chiral index bounds: 200 random end splits
    def fake(direction, za):
        sample = TraceSample(
            j=0,
            point=ParameterPoint(0.0, 0.0),
            dt=0.0,
            t_cum=0.0,
            proportions=np.array([za, 1 - za]),
            omega_bar=0j,
            zeta_a=za,
            zeta_b=1 - za,
            speed=math.inf,
            log_scale=0.0,
        )
        return EvolutionTrace(
            samples=(sample, sample), direction=direction, mode="A", schedule=None
        )

    for _ in range(200):
        ci = chiral_index(fake("ccw", rng.random()), fake("cw", rng.random()))
        assert 0.5 <= ci <= 1.0

    # schedule determinism under a fixed seed: 200 random seeds, two runs each
    cs = ConstraintSet(loop=loop, targets=nonchiral_targets(0.9))
    problem = OptimizationProblem(
        family, cs, caches={"ccw": cache_ccw, "cw": cache_cw}
    )
    for seed in rng.integers(0, 2**31 - 1, 200):
        cfg = GaConfig(population=4, generations=2, seed=int(seed))
        b1, h1 = ga_search(problem, cfg)
        b2, h2 = ga_search(problem, cfg)
        assert np.array_equal(b1, b2)
        assert h1 == h2

    elapsed = time.perf_counter() - t0
    ok = elapsed < 60.0
    _report(8, "invariant suite", ok, elapsed, "5 suites x >=200 cases")
    assert elapsed < 60.0
