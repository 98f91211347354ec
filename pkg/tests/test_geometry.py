import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from v3s.errors import DegenerateDenominator, DegenerateQuad, SingularSystem
from v3s.geometry import (Homography, Point2, Quad, build_system, gauss_solve, invert, map_point,
                          map_points, solve_homography)
from v3s.warp import projection_corners, scale_corners

UNIT = Quad.rect(1.0, 1.0)


def random_quad(rng, width=100.0, height=100.0, jitter=0.2):
    """Frame corners each pushed by up to ``jitter`` of the frame size (always convex)."""
    base = np.array([(0, 0), (0, height), (width, height), (width, 0)], dtype=float)
    offs = rng.uniform(-jitter, jitter, (4, 2)) * (width, height)
    return Quad([tuple(p) for p in base + offs])


quad_points = st.tuples(*[st.floats(-0.2, 0.2) for _ in range(8)])


def quad_from_offsets(offs, w=100.0, h=100.0):
    base = [(0, 0), (0, h), (w, h), (w, 0)]
    return Quad([(x + offs[2 * i] * w, y + offs[2 * i + 1] * h) for i, (x, y) in enumerate(base)])


# ---------------------------------------------------------------- solve

def test_unit_square_to_itself_is_identity():
    h = solve_homography(UNIT, UNIT)
    np.testing.assert_allclose(h.m, (1, 0, 0, 0, 1, 0, 0, 0), atol=1e-15)


def test_pure_vertical_scale_coefficients():
    W = H = 100.0
    h = solve_homography(Quad.rect(W, H), scale_corners(W, H, 1.0, 0.3))
    m0, m1, m2, m3, m4, m5, m6, m7 = h.m
    assert m0 == pytest.approx(1.0, abs=1e-12)
    assert m4 == pytest.approx(0.3, abs=1e-12)
    for v in (m1, m2, m3, m5, m6, m7):
        assert abs(v) < 1e-12


def test_trapezoid_is_a_genuine_perspective_map():
    dst = projection_corners(1.0, 1.0, 0.5, "right")
    h = solve_homography(UNIT, dst)
    assert abs(h.m[6]) > 1e-3
    for s, d in zip(UNIT.corners, dst.corners):
        np.testing.assert_allclose(map_point(h, s), d, atol=1e-9)


def test_trapezoid_coefficients_match_dense_least_squares():
    dst = projection_corners(1.0, 1.0, 0.5, "right")
    A, rhs = build_system(UNIT, dst)
    ref, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    np.testing.assert_allclose(solve_homography(UNIT, dst).m, ref, atol=1e-9)


def test_right_trapezoid_at_frame_size():
    # m6 fixed by the head edge: denominator at x=W is 1/c
    h = solve_homography(Quad.rect(100, 100), projection_corners(100, 100, 0.5, "right"))
    np.testing.assert_allclose(h.m, (2, 0, 0, 0.5, 1, 0, 0.01, 0), atol=1e-12)


def test_system_rows_follow_u_then_v_order():
    src = Quad.rect(2.0, 3.0)
    dst = Quad([(1, 1), (1, 4), (5, 4), (5, 1)])
    A, rhs = build_system(src, dst)
    x, y = src.corners[1]
    u, v = dst.corners[1]
    np.testing.assert_array_equal(A[1], (x, y, 1, 0, 0, 0, -x * u, -y * u))
    np.testing.assert_array_equal(A[5], (0, 0, 0, x, y, 1, -x * v, -y * v))
    assert rhs[1] == u and rhs[5] == v


def test_gauss_solve_needs_pivoting():
    A = np.array([[0.0, 1.0], [1.0, 1.0]])
    np.testing.assert_allclose(gauss_solve(A, np.array([2.0, 3.0])), [1.0, 2.0])


def test_gauss_solve_flags_singular_matrix():
    with pytest.raises(SingularSystem):
        gauss_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.array([1.0, 2.0]))


def test_elimination_stops_on_duplicated_row():
    A, rhs = build_system(UNIT, UNIT)
    A[3] = A[2]
    with pytest.raises(SingularSystem):
        gauss_solve(A, rhs)


@pytest.mark.parametrize("corners", [
    [(0, 0), (0, 0), (1, 1), (1, 0)],                  # repeated corner
    [(0, 0), (1, 1), (2, 2), (0, 3)],                  # three collinear
    [(0, 0), (0, 1), (float("nan"), 1), (1, 0)],       # not finite
])
def test_degenerate_quads_rejected(corners):
    with pytest.raises(DegenerateQuad):
        Quad(corners)


def test_quad_needs_four_corners():
    with pytest.raises(DegenerateQuad):
        Quad([(0, 0), (0, 1), (1, 1)])


def test_degenerate_quad_is_a_singular_system():
    assert issubclass(DegenerateQuad, SingularSystem)


def test_solution_is_bit_deterministic():
    rng = np.random.default_rng(5)
    src, dst = random_quad(rng), random_quad(rng)
    assert solve_homography(src, dst).m == solve_homography(src, dst).m


@settings(max_examples=200, deadline=None)
@given(quad_points, quad_points)
def test_corner_reproduction(a, b):
    src, dst = quad_from_offsets(a), quad_from_offsets(b)
    h = solve_homography(src, dst)
    for s, d in zip(src.corners, dst.corners):
        np.testing.assert_allclose(map_point(h, s), d, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.floats(1.0, 300.0), st.floats(1.0, 300.0))
def test_axis_aligned_targets_are_affine(a, b, w, h):
    hom = solve_homography(Quad.rect(w, h), scale_corners(w, h, a, b))
    assert abs(hom.m[6]) <= 1e-9 and abs(hom.m[7]) <= 1e-9


# ---------------------------------------------------------------- map_point

def test_identity_maps_point_to_itself():
    assert map_point(Homography.identity(), (13.5, 2.0)) == Point2(13.5, 2.0)


def test_pure_scale_maps_point():
    h = Homography((1, 0, 0, 0, 0.3, 0, 0, 0))
    u, v = map_point(h, (100, 100))
    assert u == 100 and v == pytest.approx(30.0, abs=1e-12)


def test_trapezoid_centre_matches_extended_precision():
    from fractions import Fraction
    h = solve_homography(UNIT, projection_corners(1.0, 1.0, 0.5, "right"))
    m = [Fraction(v) for v in h.m]
    x = y = Fraction(1, 2)
    den = m[6] * x + m[7] * y + 1
    u = (m[0] * x + m[1] * y + m[2]) / den
    v = (m[3] * x + m[4] * y + m[5]) / den
    got = map_point(h, (0.5, 0.5))
    assert got.x == pytest.approx(float(u), abs=1e-15)
    assert got.y == pytest.approx(float(v), abs=1e-15)


def test_point_on_horizon_raises():
    h = Homography((1, 0, 0, 0, 1, 0, 1, 0))
    with pytest.raises(DegenerateDenominator):
        map_point(h, (-1.0, 5.0))


def test_vectorised_map_matches_scalar_and_marks_horizon():
    rng = np.random.default_rng(0)
    h = solve_homography(Quad.rect(64, 64), random_quad(rng, 64, 64))
    xs, ys = rng.uniform(0, 64, 50), rng.uniform(0, 64, 50)
    us, vs = map_points(h, xs, ys)
    for x, y, u, v in zip(xs, ys, us, vs):
        assert (u, v) == pytest.approx(tuple(map_point(h, (x, y))), abs=1e-12)
    u, v = map_points(Homography((1, 0, 0, 0, 1, 0, 1, 0)), np.array([-1.0]), np.array([0.0]))
    assert math.isnan(u[0]) and math.isnan(v[0])


# ---------------------------------------------------------------- invert

def test_invert_identity():
    np.testing.assert_allclose(invert(Homography.identity()).m, Homography.identity().m, atol=1e-15)


def test_invert_pure_scale():
    np.testing.assert_allclose(invert(Homography((2.0, 0, 0, 0, 0.25, 0, 0, 0))).m,
                               (0.5, 0, 0, 0, 4.0, 0, 0, 0), atol=1e-15)


def test_homography_rejects_singular_matrix():
    with pytest.raises(SingularSystem):
        Homography((1, 1, 0, 1, 1, 0, 0, 0))


def test_homography_rejects_non_finite():
    with pytest.raises(SingularSystem):
        Homography((1, 0, float("inf"), 0, 1, 0, 0, 0))


@settings(max_examples=100, deadline=None)
@given(quad_points, quad_points)
def test_invert_round_trip_on_grid(a, b):
    src, dst = quad_from_offsets(a), quad_from_offsets(b)
    h = solve_homography(src, dst)
    hi = invert(h)
    for x in np.linspace(0, 100, 10):
        for y in np.linspace(0, 100, 10):
            back = map_point(hi, map_point(h, (x, y)))
            assert abs(back.x - x) <= 1e-6 and abs(back.y - y) <= 1e-6


def test_from_matrix_normalises_last_entry():
    mat = 3.0 * np.array([[1, 0, 2], [0, 1, 3], [0, 0, 1]], dtype=float)
    assert Homography.from_matrix(mat).m == pytest.approx((1, 0, 2, 0, 1, 3, 0, 0))
