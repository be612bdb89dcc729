import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from steady_el.errors import DegeneratePole, InvalidGrid, StencilHitsOrigin, UnsupportedDimension
from steady_el.grid import (GridSpec, annulus_grid, polar_basis, sphere_area, sphere_points,
                            sphere_quadrature, spherical_basis)
from steady_el.jets import Jet, atan2, norm
from steady_el.stencil import StencilConfig, fd_derivative, stencil_jet


# ---------------------------------------------------------------- frames

@pytest.mark.parametrize("theta, er, et", [
    (0.0, (1, 0), (0, 1)),
    (math.pi / 2, (0, 1), (-1, 0)),
    (math.pi / 4, (math.sqrt(2) / 2, math.sqrt(2) / 2), (-math.sqrt(2) / 2, math.sqrt(2) / 2)),
])
def test_polar_basis_examples(theta, er, et):
    e_r, e_t = polar_basis(theta)
    assert_allclose(e_r, er, atol=1e-15)
    assert_allclose(e_t, et, atol=1e-15)


def test_spherical_basis_equator():
    assert_allclose(spherical_basis(math.pi / 2, 0.0)[0], [1, 0, 0], atol=1e-15)
    assert_allclose(spherical_basis(math.pi / 2, math.pi / 2)[0], [0, 1, 0], atol=1e-15)


@pytest.mark.parametrize("phi", [0.0, math.pi, 1e-15])
def test_spherical_basis_pole_rejected(phi):
    with pytest.raises(DegeneratePole):
        spherical_basis(phi, 0.3)


@given(st.floats(1e-6, math.pi - 1e-6), st.floats(-10, 10))
def test_frames_orthonormal(phi, theta):
    E = np.array(spherical_basis(phi, theta))
    assert np.abs(E @ E.T - np.eye(3)).max() < 1e-14
    assert abs(np.linalg.det(E) - 1) < 1e-14  # right-handed (e_r, e_phi, e_theta)
    P = np.array(polar_basis(theta))
    assert np.abs(P @ P.T - np.eye(2)).max() < 1e-14


# ---------------------------------------------------------------- grids

def test_grid_rejects_empty_range():
    with pytest.raises(InvalidGrid):
        GridSpec(1.0, 1.0, 2)
    with pytest.raises(InvalidGrid):
        GridSpec(0.0, 1.0, 2)
    with pytest.raises(InvalidGrid):
        GridSpec(0.5, 2.0, 1)


def test_grid_counts_and_ordering():
    pts = annulus_grid(GridSpec(1.0, 2.0, 2, (4,)), 2)
    assert pts.shape == (8, 2)
    r = np.linalg.norm(pts, axis=1)
    assert_allclose(r[:4], 1.0)
    assert_allclose(r[4:], 2.0)


def test_grid_containment_and_geometric_radii():
    spec = GridSpec(0.5, 2.0, 5)
    pts = annulus_grid(spec, 3)
    r = np.linalg.norm(pts, axis=1)
    assert np.all((r >= 0.5 - 1e-15) & (r <= 2.0 + 1e-15))
    assert_allclose(spec.radii(), 0.5 * 4.0 ** (np.arange(5) / 4), rtol=1e-15)
    assert np.all(np.abs(np.linalg.norm(sphere_points(4, (4, 4, 8)), axis=1) - 1) < 1e-15)


def test_grid_dimension_checks():
    with pytest.raises(UnsupportedDimension):
        annulus_grid(GridSpec(), 5)
    with pytest.raises(InvalidGrid):
        annulus_grid(GridSpec(angular_resolution=(8,)), 3)


# ---------------------------------------------------------------- quadrature

@pytest.mark.parametrize("n", [2, 3, 4])
def test_quadrature_total_weight(n):
    q = sphere_quadrature(n)
    assert np.all(q.weights > 0)
    assert abs(q.weights.sum() - sphere_area(n)) < 1e-10 * sphere_area(n)
    assert np.all(np.abs(np.linalg.norm(q.nodes, axis=1) - 1) < 1e-14)


def test_quadrature_examples():
    q3 = sphere_quadrature(3)
    assert abs(q3.integrate(np.ones(len(q3.nodes))) - 4 * math.pi) < 1e-12
    q4 = sphere_quadrature(4)
    assert abs(q4.integrate(np.ones(len(q4.nodes))) - 2 * math.pi ** 2) < 1e-10
    q = sphere_quadrature(3)
    assert abs(q.integrate(q.nodes[:, 2] ** 2) - 4 * math.pi / 3) < 1e-10


def test_quadrature_radius_scaling_and_dimension():
    q = sphere_quadrature(3)
    assert_allclose(q.integrate(np.ones(len(q.nodes)), radius=2.0), 16 * math.pi, rtol=1e-14)
    with pytest.raises(UnsupportedDimension):
        sphere_quadrature(5)


def test_quadrature_polynomial_moments_4d():
    # oracle: int x_i^2 = |S^3|/4 and int x_i^4 = 3|S^3|/(4*6) on S^3
    q = sphere_quadrature(4)
    for i in range(4):
        assert_allclose(q.integrate(q.nodes[:, i] ** 2), math.pi ** 2 / 2, rtol=1e-12)
        assert_allclose(q.integrate(q.nodes[:, i] ** 4), math.pi ** 2 / 4, rtol=1e-12)


# ---------------------------------------------------------------- finite differences

def test_fd_laplacian_of_fundamental_solution():
    lap = fd_derivative(lambda x: 1 / np.sqrt(np.sum(x * x, axis=-1)),
                        np.array([[1.0, 0, 0]]), op="laplacian")
    assert abs(lap[0]) < 1e-6


def test_fd_gradient_of_hedgehog():
    J = fd_derivative(lambda x: x / np.sqrt(np.sum(x * x, axis=-1, keepdims=True)),
                      np.array([[2.0, 0, 0], [0, 1.2, -1.6]]))
    assert_allclose(np.sum(J ** 2, axis=(1, 2)), 0.5, atol=1e-6)


def test_fd_constant_field_exact_zero():
    pts = np.array([[0.3, -1.0, 2.0]])
    g = fd_derivative(lambda x: np.full(x.shape[0], 3.25), pts)
    assert np.all(g == 0)
    assert np.all(fd_derivative(lambda x: np.full(x.shape[0], 3.25), pts, op="hessian") == 0)


def test_fd_divergence():
    pts = np.array([[1.0, 0.5, -0.25]])
    div = fd_derivative(lambda x: x * 1.0, pts, op="divergence")
    assert_allclose(div, 3.0, rtol=1e-12)


def test_fd_rejects_origin():
    with pytest.raises(StencilHitsOrigin):
        fd_derivative(lambda x: x[:, 0], np.zeros((1, 3)))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=15, max_size=15), st.sampled_from([2, 4]))
def test_fd_exact_on_low_degree_polynomials(coef, order):
    # polynomial in (x, y, z) of total degree <= order; oracle is the exact derivative
    c = np.array(coef)
    monos = [(i, j, l) for i in range(order + 1) for j in range(order + 1)
             for l in range(order + 1) if i + j + l <= order][:15]

    def f(x):
        return sum(ci * x[:, 0] ** a * x[:, 1] ** b * x[:, 2] ** e
                   for ci, (a, b, e) in zip(c, monos))

    pts = np.array([[0.7, -0.4, 1.1]])
    X = Jet.variable(pts)
    exact = sum(X[0] ** a * X[1] ** b * X[2] ** e * ci if a + b + e else X[0] * 0.0 + ci
                for ci, (a, b, e) in zip(c, monos))
    J = stencil_jet(f, pts, StencilConfig(order=order))
    scale = max(1.0, np.abs(exact.hess).max(), np.abs(exact.grad).max())
    assert np.abs(J.grad - exact.grad).max() < 1e-9 * scale
    assert np.abs(J.hess - exact.hess).max() < 1e-9 * scale


# ---------------------------------------------------------------- jets

def _composite(X):
    r = norm(X)
    th = atan2(X[1], X[0])
    return (th * 3.0).sin() * r.log() + (X[2] * r.reciprocal()).exp() * X[0] ** 2


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 2.0), st.floats(-3.0, 3.0), st.floats(-1.0, 1.0))
def test_jet_derivatives_match_finite_differences(r, th, z):
    pts = np.array([[r * math.cos(th), r * math.sin(th), z]])
    J = _composite(Jet.variable(pts))
    F = stencil_jet(lambda x: _composite(Jet.variable(x, order=0)).value, pts, StencilConfig())
    scale = max(1.0, np.abs(J.hess).max())
    assert np.abs(J.grad - F.grad).max() < 1e-8 * scale
    assert np.abs(J.hess - F.hess).max() < 1e-6 * scale


def test_jet_hessian_symmetric():
    pts = np.random.default_rng(1).normal(size=(20, 3))
    J = _composite(Jet.variable(pts))
    assert np.abs(J.hess - np.swapaxes(J.hess, -1, -2)).max() < 1e-12 * np.abs(J.hess).max()


def test_stencil_config_validation():
    with pytest.raises(ValueError):
        StencilConfig(order=3)
    with pytest.raises(ValueError):
        StencilConfig(relative_step=0.5)
    with pytest.raises(ValueError):
        StencilConfig(mode="exact")
