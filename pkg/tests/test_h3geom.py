import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bryantglue.h3geom import (
    INFINITY,
    BoundaryPoint,
    Geodesic,
    GeometryError,
    Isometry,
    bp,
    build_neck_isometry,
    geodesic_point,
    hemisphere_intersection,
    hyperbolic_distance,
    interior,
    neck_isometry_closed_form,
)


# --- strategies ------------------------------------------------------------

finite_coord = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)


@st.composite
def interior_points(draw):
    x = draw(finite_coord)
    y = draw(finite_coord)
    z = draw(st.floats(min_value=0.05, max_value=20.0))
    return interior(x, y, z)


@st.composite
def isometries(draw):
    n = draw(st.integers(min_value=1, max_value=6))
    gens = []
    for _ in range(n):
        kind = draw(st.integers(min_value=0, max_value=3))
        if kind == 0:
            gens.append(Isometry.translation((draw(finite_coord), draw(finite_coord))))
        elif kind == 1:
            gens.append(Isometry.dilation(draw(st.floats(min_value=0.1, max_value=10.0))))
        elif kind == 2:
            th = draw(st.floats(min_value=-np.pi, max_value=np.pi))
            c, s = np.cos(th), np.sin(th)
            mat = np.array([[c, -s], [s, c]])
            if draw(st.booleans()):
                mat = mat @ np.diag([1.0, -1.0])
            gens.append(Isometry.rotation(mat))
        else:
            gens.append(Isometry.inversion())
    iso = Isometry.identity()
    for g in gens:
        iso = iso @ g
    return iso


# --- generator basics -------------------------------------------------------


def test_inversion_fixes_unit_point():
    p = interior(0.0, 0.0, 1.0)
    assert np.allclose(Isometry.inversion().apply(p), p, atol=1e-15)


def test_translation_inverse_roundtrip():
    t = Isometry.translation((0.7, -1.3))
    p = interior(0.2, 0.4, 2.5)
    assert np.allclose((t.inverse() @ t).apply(p), p, atol=1e-15)


def test_dilation_by_two():
    assert np.allclose(Isometry.dilation(2.0).apply(interior(1, 0, 1)), [2, 0, 2])


def test_compose_inversion_twice_is_identity_chain():
    comp = Isometry.inversion() @ Isometry.inversion()
    assert comp.generators == ()
    assert comp.is_identity()


def test_compose_dilation_cancel():
    comp = Isometry.dilation(3.0) @ Isometry.dilation(1.0 / 3.0)
    assert comp.is_identity()


def test_compose_translation_dilation_closed_form():
    # expanding the generator definitions: (x, z) -> (lam*x + a, lam*z)
    a = np.array([0.3, -0.8])
    lam = 1.7
    comp = Isometry.translation(a) @ Isometry.dilation(lam)
    for p in [interior(0.5, 0.2, 1.0), interior(-2, 3, 0.4)]:
        expect = np.array([lam * p[0] + a[0], lam * p[1] + a[1], lam * p[2]])
        assert np.allclose(comp.apply(p), expect, atol=1e-14)


def test_apply_preserves_height_sign():
    iso = Isometry.inversion() @ Isometry.translation((2.0, 0.0))
    pts = np.array([[0.1, 0.2, 0.5], [-1.0, 0.3, 3.0]])
    assert np.all(iso.apply(pts)[:, 2] > 0)


@settings(max_examples=40, deadline=None)
@given(isometries(), isometries(), isometries(), interior_points())
def test_compose_associative(f, g, h, p):
    lhs = ((f @ g) @ h).apply(p)
    rhs = (f @ (g @ h)).apply(p)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(isometries(), interior_points(), interior_points())
def test_distance_invariance(iso, p, q):
    d0 = hyperbolic_distance(p, q)
    d1 = hyperbolic_distance(iso.apply(p), iso.apply(q))
    assert abs(d0 - d1) <= 1e-10 * (1 + d0)


@settings(max_examples=40, deadline=None)
@given(isometries(), interior_points())
def test_inverse_roundtrip(iso, p):
    back = iso.inverse().apply(iso.apply(p))
    assert np.allclose(back, p, rtol=1e-12, atol=1e-11)


@settings(max_examples=25, deadline=None)
@given(isometries(), interior_points())
def test_jacobian_matches_finite_differences(iso, p):
    jac = iso.jacobian(p)
    h = 1e-6
    for k in range(3):
        dp = np.zeros(3)
        dp[k] = h
        col = (iso.apply(p + dp) - iso.apply(p - dp)) / (2 * h)
        assert np.allclose(jac[:, k], col, rtol=5e-5, atol=5e-6)


# --- geodesics ---------------------------------------------------------------


def test_geodesic_point_vertical_log2():
    g = Geodesic(bp(0, 0), INFINITY)
    p = geodesic_point(g, interior(0, 0, 1), np.log(2.0))
    assert np.allclose(p, [0, 0, 2], atol=1e-12)


def test_geodesic_point_zero_distance_returns_reference():
    g = Geodesic(bp(-1, 0), bp(2, 0.5))
    ref = g.point_at(0.37)
    assert np.allclose(geodesic_point(g, ref, 0.0), ref, atol=1e-12)


def test_geodesic_point_plus_minus_midpoint():
    g = Geodesic(bp(-1, 0), bp(3, 1))
    ref = g.point_at(-0.2)
    d = 0.8
    p_plus = geodesic_point(g, ref, d)
    p_minus = geodesic_point(g, ref, -d)
    # the reference is the hyperbolic midpoint of the pair
    assert abs(hyperbolic_distance(p_plus, ref) - d) < 1e-10
    assert abs(hyperbolic_distance(p_minus, ref) - d) < 1e-10
    mid = geodesic_point(g, p_minus, d)
    assert np.allclose(mid, ref, atol=1e-10)


def test_geodesic_point_rejects_off_curve_reference():
    g = Geodesic(bp(0, 0), INFINITY)
    with pytest.raises(GeometryError, match="off the geodesic"):
        geodesic_point(g, interior(0.5, 0, 1.0), 1.0)


def test_hemisphere_intersection_vertical():
    g = Geodesic(bp(0, 0), INFINITY)
    assert np.allclose(hemisphere_intersection(g), [0, 0, 1], atol=1e-12)


def test_hemisphere_intersection_analytic():
    # endpoints (2,0) and (0.5,0): circle center (1.25,0), radius 0.75;
    # solving with x^2+z^2 = 1 gives x = 0.8, z = 0.6 exactly.
    g = Geodesic(bp(2, 0), bp(0.5, 0))
    q = hemisphere_intersection(g)
    assert np.allclose(q, [0.8, 0.0, 0.6], atol=1e-10)
    assert abs(np.sum(q * q) - 1.0) < 1e-10
    g.parameter_of(q)  # lies on the geodesic


def test_hemisphere_intersection_requires_transversality():
    with pytest.raises(GeometryError, match="transverse"):
        hemisphere_intersection(Geodesic(bp(2, 0), bp(3, 0)))


# --- neck-normalizing isometry ----------------------------------------------


def _sample_anchor_config():
    far = bp(12.0, -4.0)
    near = bp(0.04, 0.02)
    return far, near, 0.03


def test_neck_isometry_sends_far_anchor_to_infinity():
    far, near, d = _sample_anchor_config()
    iso = build_neck_isometry(far, near, d)
    assert iso.boundary(far).is_infinity


def test_neck_isometry_fixes_near_anchor():
    far, near, d = _sample_anchor_config()
    iso = build_neck_isometry(far, near, d)
    img = iso.boundary(near)
    assert not img.is_infinity
    assert np.allclose(img.xy, near.xy, atol=1e-12)


def test_neck_isometry_offset_point_to_height_one():
    far, near, d = _sample_anchor_config()
    iso = build_neck_isometry(far, near, d)
    gamma = Geodesic(near, far)
    q = hemisphere_intersection(gamma)
    p_off = geodesic_point(gamma, q, d)
    assert abs(iso.apply(p_off)[2] - 1.0) < 1e-10


def test_neck_isometry_matches_closed_form():
    far, near, d = _sample_anchor_config()
    iso = build_neck_isometry(far, near, d)
    rng = np.random.default_rng(7)
    pts = np.column_stack([rng.uniform(-1, 1, 40), rng.uniform(-1, 1, 40), rng.uniform(0.3, 2.0, 40)])
    direct = neck_isometry_closed_form(far, near, d, pts)
    chained = iso.apply(pts)
    assert np.allclose(direct, chained, rtol=1e-12, atol=1e-12)


def test_neck_isometry_infinite_far_anchor_is_dilation():
    near = bp(0.0, 0.0)
    d = 0.2
    iso = build_neck_isometry(INFINITY, near, d)
    assert iso.boundary(INFINITY).is_infinity
    assert np.allclose(iso.boundary(near).xy, [0, 0], atol=1e-14)
    # the point at distance d above the hemisphere along the axis goes to z = 1
    p = interior(0, 0, np.exp(d))
    assert abs(iso.apply(p)[2] - 1.0) < 1e-12


def test_neck_isometry_asymptotic_expansion():
    # z-image ~ z - d + 2 (x - near) . xi / |xi|^2, error O(eps^2 log eps);
    # x-image ~ x, error O(eps).  Checked by an eps-sweep slope fit.
    rng = np.random.default_rng(3)
    xy = np.column_stack([rng.uniform(-0.5, 0.5, 30), rng.uniform(-0.5, 0.5, 30)])
    zs = rng.uniform(-1.0, 1.0, 30)
    eps_list = [0.04, 0.02, 0.01, 0.005]
    err_x, err_z = [], []
    for eps in eps_list:
        eta = -eps * np.log(eps)
        # validity band of the expansion: |z - 1| <= 2 eta
        pts = np.column_stack([xy, 1.0 + 2.0 * eta * zs])
        far = bp(1.0 / eps, 0.3)
        near = bp(0.4 * eps, -0.3 * eps)
        d = 0.5 * eps
        iso = build_neck_isometry(far, near, d)
        img = iso.apply(pts)
        xi = far.as_array() - near.as_array()
        tilt = 2.0 * ((pts[:, :2] - near.as_array()) @ xi) / (xi @ xi)
        z_pred = pts[:, 2] - d + tilt
        err_x.append(np.max(np.linalg.norm(img[:, :2] - pts[:, :2], axis=1)))
        err_z.append(np.max(np.abs(img[:, 2] - z_pred)))
    le = np.log(np.asarray(eps_list))
    slope_x = np.polyfit(le, np.log(err_x), 1)[0]
    slope_z = np.polyfit(le, np.log(err_z), 1)[0]
    assert 0.8 < slope_x < 1.3
    assert 1.6 < slope_z < 2.4


def test_neck_isometry_rejects_coincident_anchors():
    with pytest.raises(GeometryError):
        build_neck_isometry(bp(1, 1), bp(1, 1), 0.0)
