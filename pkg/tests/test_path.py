import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epsteer import (
    InputError,
    LoopSpec,
    ParameterPoint,
    build_loop,
    default_loop_spec,
    min_ep_distance,
    orient,
    winding_number,
)

EP = ParameterPoint(0.0, 1.0)


def square_spec(side=1.0):
    pts = (
        ParameterPoint(0, 0),
        ParameterPoint(side, 0),
        ParameterPoint(side, side),
        ParameterPoint(0, side),
        ParameterPoint(0, 0),
    )
    return LoopSpec(kind="polyline", polyline=pts)


class TestBuildLoop:
    def test_default_circle(self):
        loop = build_loop(default_loop_spec())
        assert loop.points.shape == (101, 2)
        assert np.array_equal(loop.points[0], loop.points[-1])
        assert loop.arc_coords[0] == 0.0
        assert loop.arc_coords[-1] == 1.0
        # start point on the degenerate axis
        assert np.allclose(loop.points[0], [0.0, 0.0], atol=1e-15)
        # symmetric discretization: halfway by arc at the antipode
        assert loop.arc_coords[50] == pytest.approx(0.5, abs=1e-12)

    def test_arc_sum_normalized(self):
        loop = build_loop(default_loop_spec())
        assert abs(loop.dc.sum() - 1.0) < 1e-12
        assert np.all(np.diff(loop.arc_coords) > 0)

    def test_square_rho(self):
        loop = build_loop(square_spec(1.0))
        assert loop.rho == pytest.approx(16.0, abs=1e-12)
        assert loop.n_intervals == 4

    @settings(max_examples=40, deadline=None)
    @given(
        cx=st.floats(-3, 3),
        cy=st.floats(-3, 3),
        r=st.floats(0.1, 3),
        n=st.integers(3, 220),
    )
    def test_closure_and_normalization_property(self, cx, cy, r, n):
        spec = LoopSpec(center=ParameterPoint(cx, cy), radii=(r, r), n_intervals=n)
        loop = build_loop(spec)
        assert np.array_equal(loop.points[0], loop.points[-1])
        assert abs(loop.dc.sum() - 1.0) < 1e-12
        total = np.linalg.norm(np.diff(loop.points, axis=0), axis=1).sum()
        assert loop.rho == pytest.approx(total**2, rel=1e-12)

    def test_ellipse(self):
        spec = LoopSpec(kind="ellipse", radii=(2.0, 1.0), n_intervals=40)
        loop = build_loop(spec)
        assert loop.points.shape == (41, 2)
        assert np.array_equal(loop.points[0], loop.points[-1])

    def test_open_polyline_rejected(self):
        pts = (ParameterPoint(0, 0), ParameterPoint(1, 0), ParameterPoint(1, 1))
        with pytest.raises(InputError, match="not closed"):
            build_loop(LoopSpec(kind="polyline", polyline=pts))

    def test_too_few_distinct_points(self):
        pts = (ParameterPoint(0, 0), ParameterPoint(1, 0), ParameterPoint(0, 0))
        with pytest.raises(InputError):
            build_loop(LoopSpec(kind="polyline", polyline=pts))

    def test_zero_length_interval_rejected(self):
        pts = (
            ParameterPoint(0, 0),
            ParameterPoint(1, 0),
            ParameterPoint(1, 0),
            ParameterPoint(0, 1),
            ParameterPoint(0, 0),
        )
        with pytest.raises(InputError, match="zero-length"):
            build_loop(LoopSpec(kind="polyline", polyline=pts))

    def test_bad_radii(self):
        with pytest.raises(InputError):
            build_loop(LoopSpec(radii=(1.0, 2.0)))  # circle needs a == b
        with pytest.raises(InputError):
            build_loop(LoopSpec(radii=(-1.0, -1.0)))

    def test_min_intervals(self):
        with pytest.raises(InputError):
            build_loop(LoopSpec(n_intervals=1))

    def test_bad_kind(self):
        with pytest.raises(InputError):
            LoopSpec(kind="spiral")


class TestOrient:
    def test_ccw_is_stored_order(self, loop):
        fwd = orient(loop, "ccw")
        assert np.array_equal(fwd.points, loop.points)
        assert fwd.direction == "ccw"

    def test_cw_reverses_with_fixed_start(self, loop):
        rev = orient(loop, "cw")
        n = loop.n_intervals
        for j in (0, 1, 17, n):
            assert np.array_equal(rev.points[j], loop.points[n - j])
        assert np.array_equal(rev.points[0], loop.points[0])  # closure
        assert rev.direction == "cw"

    def test_involution(self, loop):
        twice = orient(orient(loop, "cw"), "cw")
        assert np.array_equal(twice.points, loop.points)
        assert np.array_equal(twice.dc, loop.dc)

    def test_dc_reversed(self, loop):
        rev = orient(loop, "cw")
        assert np.array_equal(rev.dc, loop.dc[::-1])

    def test_bad_direction(self, loop):
        with pytest.raises(InputError):
            orient(loop, "widdershins")


class TestMinEpDistance:
    def test_circle_about_ep(self, loop):
        assert min_ep_distance(loop, [EP]) == pytest.approx(1.0, abs=1e-12)

    def test_far_loop(self):
        spec = LoopSpec(center=ParameterPoint(10.0, 10.0), radii=(0.5, 0.5))
        loop = build_loop(spec)
        assert min_ep_distance(loop, [EP]) > 10.0

    def test_empty_eps(self, loop):
        assert min_ep_distance(loop, []) == math.inf


class TestWinding:
    def test_ccw_plus_one(self, loop):
        assert winding_number(loop, EP) == 1

    def test_cw_minus_one(self, loop):
        assert winding_number(orient(loop, "cw"), EP) == -1

    def test_outside_zero(self):
        spec = LoopSpec(center=ParameterPoint(3.0, 3.0), radii=(0.2, 0.2), n_intervals=20)
        assert winding_number(build_loop(spec), EP) == 0

    def test_too_close_rejected(self):
        spec = LoopSpec(center=ParameterPoint(0.0, 0.0), radii=(1.0, 1.0))
        loop = build_loop(spec)  # passes through (0, 1) exactly
        with pytest.raises(InputError):
            winding_number(loop, EP)
