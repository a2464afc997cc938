import json
import math

import numpy as np
import pytest

from epsteer import (
    ConstraintSet,
    GaConfig,
    InputError,
    MethodReport,
    OptimizationProblem,
    chiral_index,
    chiral_targets,
    compare_methods,
    stable_time_runner,
    time_to_purity,
    uniform_time_runner,
)
from epsteer.evolution import EvolutionTrace, TraceSample
from epsteer.hamiltonian import ParameterPoint


def fake_trace(direction, mode, zeta_end):
    """Minimal two-sample trace with a prescribed end mode split."""
    za, zb = zeta_end

    def sample(j, a, b):
        return TraceSample(
            j=j,
            point=ParameterPoint(0.0, 0.0),
            dt=0.0,
            t_cum=0.0,
            proportions=np.array([a, b]),
            omega_bar=0j,
            zeta_a=a,
            zeta_b=b,
            speed=math.inf,
            log_scale=0.0,
        )

    return EvolutionTrace(
        samples=(sample(0, 1.0, 0.0), sample(1, za, zb)),
        direction=direction,
        mode=mode,
        schedule=None,
    )


class TestChiralIndex:
    def test_perfect_chirality(self):
        ccw = fake_trace("ccw", "A", (0.0, 1.0))
        cw = fake_trace("cw", "A", (1.0, 0.0))
        assert chiral_index(ccw, cw) == 1.0

    def test_symmetric_minimum(self):
        ccw = fake_trace("ccw", "A", (0.5, 0.5))
        cw = fake_trace("cw", "A", (0.5, 0.5))
        assert chiral_index(ccw, cw) == 0.5

    def test_mixed_ends(self):
        ccw = fake_trace("ccw", "A", (0.1, 0.9))
        cw = fake_trace("cw", "A", (0.8, 0.2))
        assert chiral_index(ccw, cw) == pytest.approx(0.85, abs=1e-15)

    def test_bounds_random(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            za1, za2 = rng.random(2)
            ccw = fake_trace("ccw", "B", (za1, 1 - za1))
            cw = fake_trace("cw", "B", (za2, 1 - za2))
            ci = chiral_index(ccw, cw)
            assert 0.5 <= ci <= 1.0

    def test_mode_mismatch_rejected(self):
        with pytest.raises(InputError):
            chiral_index(fake_trace("ccw", "A", (1, 0)), fake_trace("cw", "B", (1, 0)))

    def test_direction_mismatch_rejected(self):
        with pytest.raises(InputError):
            chiral_index(fake_trace("cw", "A", (1, 0)), fake_trace("cw", "A", (1, 0)))


class TestTimeToPurity:
    def test_uniform_monotone(self, cache_ccw):
        runner = uniform_time_runner(cache_ccw, mode="A", target_mode="B")
        out = time_to_purity(runner, (0.80, 0.85, 0.90, 0.95))
        times = [t for _, t in out]
        assert all(math.isfinite(t) for t in times)
        assert all(b >= a - 1e-3 * max(a, 1.0) for a, b in zip(times, times[1:]))

    def test_levels_reported_in_given_order(self, cache_ccw):
        runner = uniform_time_runner(cache_ccw, mode="A", target_mode="B")
        out = time_to_purity(runner, (0.9, 0.8))
        assert [pi for pi, _ in out] == [0.9, 0.8]
        assert out[0][1] >= out[1][1]

    def test_identity_target_time_zero(self, cache_cw):
        # mode A recovers itself clockwise with no dwells at all
        runner = uniform_time_runner(cache_cw, mode="A", target_mode="A")
        assert runner(0.05) == 0.0

    def test_unattainable_is_inf(self, cache_ccw):
        runner = uniform_time_runner(cache_ccw, mode="A", target_mode="B", t_max=2.0)
        assert runner(0.999) == math.inf

    def test_stable_runner_reaches_levels(self, cache_ccw):
        runner = stable_time_runner(cache_ccw, mode="A", target_mode="B")
        out = time_to_purity(runner, (0.8, 0.9))
        assert all(math.isfinite(t) for _, t in out)
        assert out[1][1] >= out[0][1]

    def test_bad_level_rejected(self, cache_ccw):
        runner = uniform_time_runner(cache_ccw)
        with pytest.raises(InputError):
            time_to_purity(runner, (0.5, 1.0))


class TestCompareMethods:
    @pytest.fixture(scope="class")
    def reports(self, family, loop, cache_ccw, cache_cw):
        cs = ConstraintSet(loop=loop, targets=chiral_targets(0.9))
        problem = OptimizationProblem(
            family, cs, caches={"ccw": cache_ccw, "cw": cache_cw}
        )
        return compare_methods(
            problem, ga_config=GaConfig(population=48, generations=120, seed=11)
        )

    def test_one_report_per_method(self, reports):
        assert [r.method for r in reports] == ["uniform", "stable", "optimized"]

    def test_ci_ordering(self, reports):
        by = {r.method: r for r in reports}
        for mode in ("A", "B"):
            assert by["optimized"].ci[mode] >= by["stable"].ci[mode]
            assert by["stable"].ci[mode] >= by["uniform"].ci[mode]

    def test_stable_mode_a_beats_uniform(self, reports):
        by = {r.method: r for r in reports}
        assert by["stable"].ci["A"] >= by["uniform"].ci["A"]

    def test_equal_budget_for_uniform(self, reports):
        by = {r.method: r for r in reports}
        assert by["uniform"].total_time == pytest.approx(
            by["optimized"].total_time, abs=1e-12
        )

    def test_optimized_ci_mode_independent(self, reports):
        by = {r.method: r for r in reports}
        assert abs(by["optimized"].ci["A"] - by["optimized"].ci["B"]) <= 0.02

    def test_json_round_trip(self, reports):
        for rep in reports:
            blob = json.dumps(rep.to_dict(), sort_keys=True)
            back = MethodReport.from_dict(json.loads(blob))
            assert back.to_dict() == rep.to_dict()
            assert json.dumps(back.to_dict(), sort_keys=True) == blob
