import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from devsurf.diffgeo import (
    PointFrame, confidence_weight, fundamental_forms, gaussian_curvature, principal,
    shape_operator, unit_normal)
from devsurf.errors import DegenerateParameterizationError
from devsurf.scenarios import rational_arc
from devsurf.surface import (ControlGrid, SurfaceModel, bspline_surface, panel_knots,
                             precompute_rows)


def sphere_patch(radius=2.0, sweep=1.2):
    """Exact rational bicubic sphere patch (surface of revolution of an arc)."""
    arc, w = rational_arc(sweep)
    pts = np.empty((4, 4, 3))
    for i in range(4):
        x, z = radius * arc[i]
        for j in range(4):
            pts[i, j] = [x * arc[j, 0], x * arc[j, 1], z]
    return SurfaceModel(ControlGrid(pts), panel_knots(1), panel_knots(1), "panel-grid",
                        np.outer(w, w), (1, 1))


def frames_at(model, params):
    return PointFrame.from_quantities(precompute_rows(model, params).evaluate(model.flat_points()))


def grid_params(n=5):
    g = np.linspace(0.05, 0.95, n)
    uu, vv = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([uu.ravel(), vv.ravel()])


def plane_model():
    g = np.linspace(0, 1, 4)
    uu, vv = np.meshgrid(g, g, indexing="ij")
    return bspline_surface(np.stack([uu, 2 * vv, 0 * uu], -1))


def test_sphere_is_exact_and_has_constant_curvature():
    model = sphere_patch(2.0)
    f = frames_at(model, grid_params())
    np.testing.assert_allclose(np.linalg.norm(f.position, axis=1), 2.0, atol=1e-12)
    np.testing.assert_allclose(gaussian_curvature(f), 0.25, atol=1e-9)
    data = principal(f)
    np.testing.assert_allclose(np.abs(data.kappa1), 0.5, atol=1e-9)
    np.testing.assert_allclose(np.abs(data.kappa2), 0.5, atol=1e-9)
    assert np.all(data.umbilic)
    np.testing.assert_allclose(data.weight, 0.0, atol=1e-8)


def test_plane_has_zero_curvature_and_constant_normal():
    f = frames_at(plane_model(), grid_params())
    np.testing.assert_allclose(gaussian_curvature(f), 0.0, atol=1e-14)
    np.testing.assert_allclose(f.normal, np.tile([0, 0, 1.0], (25, 1)), atol=1e-14)
    assert np.all(confidence_weight(*[principal(f).kappa1] * 2) == 0.0)


def test_cylinder_principal_data():
    from devsurf.scenarios import cylinder, fit_parametric
    model = fit_parametric(bspline_surface(np.zeros((9, 5, 3))), cylinder(1.0, math.pi / 2, 2.0),
                           dense=(60, 20))
    f = frames_at(model, grid_params())
    data = principal(f)
    # polynomial approximation of a circle: curvature good to about half a percent
    np.testing.assert_allclose(np.abs(data.kappa1), 1.0, atol=1e-2)
    np.testing.assert_allclose(data.kappa2, 0.0, atol=1e-2)
    np.testing.assert_allclose(data.q1[:, 2], 0.0, atol=1e-3)
    np.testing.assert_allclose(np.abs(data.q2[:, 2]), 1.0, atol=1e-3)
    assert np.all(data.weight > 0.99)


@given(seed=st.integers(0, 10_000))
def test_principal_consistency(seed):
    rng = np.random.default_rng(seed)
    g = np.linspace(0, 1, 5)
    uu, vv = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([uu, vv, 0.3 * rng.normal(size=uu.shape)], -1)
    model = bspline_surface(pts)
    f = frames_at(model, rng.uniform(0.05, 0.95, size=(6, 2)))
    data = principal(f)
    K = gaussian_curvature(f)
    np.testing.assert_allclose(data.kappa1 * data.kappa2, K, rtol=1e-7, atol=1e-9)
    assert np.all(np.abs(data.kappa1) >= np.abs(data.kappa2))
    n = f.normal
    for q in (data.q1, data.q2):
        np.testing.assert_allclose(np.linalg.norm(q, axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.einsum("ij,ij->i", q, n), 0.0, atol=1e-10)
    cos = np.einsum("ij,ij->i", data.q1, data.q2)
    np.testing.assert_allclose(cos[~data.umbilic], 0.0, atol=1e-7)
    ev = np.sort(np.linalg.eigvals(shape_operator(f)).real, axis=-1)
    np.testing.assert_allclose(ev, np.sort(np.stack([data.kappa1, data.kappa2], -1), axis=-1),
                               atol=1e-8)
    assert np.all((data.weight >= 0) & (data.weight <= 1))


@given(seed=st.integers(0, 10_000))
def test_forms_symmetric_and_first_form_positive(seed):
    rng = np.random.default_rng(seed)
    model = bspline_surface(rng.normal(size=(5, 5, 3)))
    f = frames_at(model, rng.uniform(0, 1, size=(4, 2)))
    try:
        first, second = fundamental_forms(f)
    except DegenerateParameterizationError:
        return
    np.testing.assert_allclose(first, np.swapaxes(first, -1, -2))
    np.testing.assert_allclose(second, np.swapaxes(second, -1, -2))
    assert np.all(np.linalg.det(first) > 0)


def test_lagged_and_exact_normals():
    su = np.array([2.0, 0, 0])
    sv = np.array([0, 3.0, 0])
    np.testing.assert_allclose(unit_normal(su, sv), [0, 0, 1])
    np.testing.assert_allclose(unit_normal(su, sv, lagged_norm=3.0), [0, 0, 2])
    with pytest.raises(DegenerateParameterizationError):
        unit_normal(su, 2 * su)


def test_confidence_weight_examples():
    assert confidence_weight(2.0, 0.0) == 1.0
    assert confidence_weight(-2.0, 1.0) == 0.5
    assert confidence_weight(0.0, 0.0) == 0.0
