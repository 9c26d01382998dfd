import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from devsurf.errors import DomainError
from devsurf.surface import (
    SurfaceModel, ControlGrid, basis_eval, basis_funs, bspline_surface, build_panel_grid,
    check_knots, clamped_knots, panel_knots, precompute_rows, surface_eval, surface_partials)
from oracles import bezier_patch, bspline_point, cox_de_boor

unit = st.floats(0.0, 1.0)


def random_model(seed, shape=(6, 7), weights=False):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=shape + (3,))
    w = rng.uniform(0.5, 2.0, size=shape) if weights else None
    return bspline_surface(pts, w)


def test_bezier_midpoint_basis():
    vals = basis_eval(clamped_knots(4), 0.5)
    np.testing.assert_allclose(vals, [0.125, 0.375, 0.375, 0.125])


@given(u=unit, n=st.integers(4, 11))
def test_basis_matches_cox_de_boor(u, n):
    knots = clamped_knots(n)
    span, ders = basis_funs(knots, u, 0)
    expect = [cox_de_boor(knots, span - 3 + r, 3, u) for r in range(4)]
    np.testing.assert_allclose(ders[0], expect, atol=1e-12)


@given(u=unit, n=st.integers(4, 9))
def test_partition_of_unity_and_derivative_sums(u, n):
    _, ders = basis_funs(clamped_knots(n), u, 2)
    assert abs(ders[0].sum() - 1) < 1e-12
    assert abs(ders[1].sum()) < 1e-9 and abs(ders[2].sum()) < 1e-8


@given(u=st.floats(0.01, 0.99), n=st.integers(4, 8))
def test_basis_derivatives_finite_difference(u, n):
    knots = clamped_knots(n)
    h = 1e-6

    def full(x, order):
        span, d = basis_funs(knots, x, 2)
        out = np.zeros(n)
        out[span - 3:span + 1] = d[order]
        return out

    # skip points within h of a knot, where one-sided pieces differ
    if np.min(np.abs(knots - u)) < 1e-4:
        return
    fd1 = (full(u + h, 0) - full(u - h, 0)) / (2 * h)
    fd2 = (full(u + h, 1) - full(u - h, 1)) / (2 * h)
    np.testing.assert_allclose(full(u, 1), fd1, atol=1e-5)
    np.testing.assert_allclose(full(u, 2), fd2, atol=1e-3)


@given(u=unit, v=unit, seed=st.integers(0, 1000))
def test_bezier_panel_matches_de_casteljau(u, v, seed):
    ctrl = np.random.default_rng(seed).normal(size=(4, 4, 3))
    model = build_panel_grid(1, 1, ctrl)
    np.testing.assert_allclose(surface_eval(model, u, v), bezier_patch(ctrl, u, v), atol=1e-12)


@given(u=unit, v=unit, seed=st.integers(0, 1000), rational=st.booleans())
def test_surface_matches_recursive_definition(u, v, seed, rational):
    model = random_model(seed, weights=rational)
    expect = bspline_point(model.knots_u, model.knots_v, model.points, u, v, model.weights)
    np.testing.assert_allclose(surface_eval(model, u, v), expect, atol=1e-11)


@pytest.mark.parametrize("rational", [False, True])
def test_partials_finite_difference(rational):
    model = random_model(3, weights=rational)
    h = 1e-5
    for u, v in [(0.31, 0.47), (0.62, 0.13), (0.9, 0.77)]:
        su, sv, suu, suv, svv = surface_partials(model, u, v)
        S = lambda a, b: surface_eval(model, a, b)
        np.testing.assert_allclose(su, (S(u + h, v) - S(u - h, v)) / (2 * h), atol=1e-6)
        np.testing.assert_allclose(sv, (S(u, v + h) - S(u, v - h)) / (2 * h), atol=1e-6)
        np.testing.assert_allclose(suu, (S(u + h, v) - 2 * S(u, v) + S(u - h, v)) / h ** 2,
                                   atol=1e-3)
        np.testing.assert_allclose(svv, (S(u, v + h) - 2 * S(u, v) + S(u, v - h)) / h ** 2,
                                   atol=1e-3)
        fd_uv = (S(u + h, v + h) - S(u + h, v - h) - S(u - h, v + h) + S(u - h, v - h)) / (4 * h * h)
        np.testing.assert_allclose(suv, fd_uv, atol=1e-3)


def test_cached_rows_match_direct_evaluation():
    model = random_model(5, weights=True)
    params = np.random.default_rng(0).uniform(size=(30, 2))
    rows = precompute_rows(model, params)
    q = rows.evaluate(model.flat_points())
    for k, (u, v) in enumerate(params):
        np.testing.assert_allclose(q[0, k], surface_eval(model, u, v), atol=1e-12)
        np.testing.assert_allclose(q[1:, k], np.array(surface_partials(model, u, v)), atol=1e-10)
    M = rows.matrix("u")
    np.testing.assert_allclose(M @ model.flat_points(), q[1], atol=1e-12)
    row = rows.row(4, "vv")
    np.testing.assert_allclose(row.dot(model.flat_points()), q[5, 4], atol=1e-12)


@given(pts=arrays(float, (5, 5, 3), elements=st.floats(-10, 10)),
       shift=arrays(float, 3, elements=st.floats(-10, 10)))
def test_affine_invariance(pts, shift):
    a = bspline_surface(pts)
    b = bspline_surface(pts + shift)
    params = np.array([[0.2, 0.3], [0.7, 0.9], [1.0, 0.0]])
    np.testing.assert_allclose(b.evaluate(params), a.evaluate(params) + shift, atol=1e-9)


def test_panel_grid_counts():
    for rows, count in [(3, 40), (5, 64), (10, 124), (30, 364)]:
        assert build_panel_grid(rows, 1).n_ctrl == count
    assert build_panel_grid(2, 3).control.shape == (7, 10)


def test_panel_grid_is_c0_and_bezier_per_panel():
    rng = np.random.default_rng(1)
    model = build_panel_grid(2, 2, rng.normal(size=(7, 7, 3)))
    # the shared boundary column is one row of control points for both neighbours
    for v in np.linspace(0, 1, 7):
        left = surface_eval(model, 0.5 - 1e-13, v)
        right = surface_eval(model, 0.5, v)
        np.testing.assert_allclose(left, right, atol=1e-9)
    pts = model.points
    block = pts[3:7, 0:4]
    for u, v in [(0.2, 0.3), (0.9, 0.1)]:
        np.testing.assert_allclose(surface_eval(model, 0.5 + u / 2, v / 2),
                                   bezier_patch(block, u, v), atol=1e-12)


def test_panel_index_map_and_bounds():
    model = build_panel_grid(2, 3)
    idx = model.panel_index_map()
    assert len(idx) == 6
    np.testing.assert_array_equal(idx[(1, 2)][0], [3 * 10 + 6, 3 * 10 + 7, 3 * 10 + 8, 3 * 10 + 9])
    assert model.panel_bounds(1, 2) == ((0.5, 1.0), (2 / 3, 1.0))
    with pytest.raises(DomainError):
        bspline_surface(np.zeros((4, 4, 3))).panel_index_map()


def test_default_panel_seed_is_unit_square():
    pts = build_panel_grid(1, 2).points
    assert pts.shape == (4, 7, 3)
    assert np.all(pts[..., 2] == 0) and pts[..., 0].max() == 1 and pts[..., 1].max() == 1


@pytest.mark.parametrize("bad", [
    np.array([0, 0, 0, 0.5, 1, 1, 1, 1.0]),
    np.array([0, 0, 0, 0, 0.5, 0.5, 0.5, 0.5, 1, 1, 1, 1.0]),
    np.array([0, 0, 0, 0, 0.7, 0.3, 1, 1, 1, 1.0]),
    np.array([0, 0, 0, 0, np.nan, 1, 1, 1, 1.0]),
])
def test_bad_knots_rejected(bad):
    with pytest.raises(DomainError):
        check_knots(bad)


def test_triple_interior_knots_accepted():
    check_knots(panel_knots(3))


def test_invalid_inputs():
    with pytest.raises(DomainError):
        bspline_surface(np.zeros((3, 5, 3)))
    with pytest.raises(DomainError):
        bspline_surface(np.zeros((4, 4, 3)), weights=-np.ones((4, 4)))
    with pytest.raises(DomainError):
        surface_eval(bspline_surface(np.zeros((4, 4, 3))), 1.2, 0.5)
    with pytest.raises(ValueError):
        build_panel_grid(0, 2)
    with pytest.raises(DomainError):
        SurfaceModel(ControlGrid(np.zeros((4, 4, 3))), clamped_knots(4), clamped_knots(4), "mesh")


def test_endpoint_interpolation():
    model = random_model(2)
    np.testing.assert_allclose(surface_eval(model, 0, 0), model.points[0, 0], atol=1e-14)
    np.testing.assert_allclose(surface_eval(model, 1, 1), model.points[-1, -1], atol=1e-14)
