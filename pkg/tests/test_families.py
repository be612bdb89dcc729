import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from steady_el.errors import (InvalidParameter, NoExistence, NonUnitDirector, Unclassifiable,
                              ValidationError)
from steady_el.families import (classify_profile, from_dict, make_case_i, make_case_ii,
                                make_case_iii, make_constant_director, make_custom_profile,
                                make_hedgehog, make_landau, reduced_system_residual,
                                sample_profiles)
from steady_el.grid import GridSpec, annulus_grid, sphere_points
from steady_el.profile import compute_C1, solve_profile
from steady_el.residual import (momentum_residual, scaling_check, smallness_norms,
                                unit_length_check, verify)
from steady_el.stencil import StencilConfig

FD = StencilConfig(mode="forced-fd")


def at(spec, *pt):
    u, p, d = spec.values(np.array([pt], dtype=float))
    return u[0], p[0], d[0]


# ---------------------------------------------------------------- case (i)

def test_case_i_rest_state_with_unit_winding():
    spec = make_case_i(0, 0, 0)
    pts = annulus_grid(GridSpec(), 2)
    u, p, d = spec.values(pts)
    r = np.linalg.norm(pts, axis=1)
    assert np.all(u == 0)
    # exact pressure of this triple is -1/(2|x|^2) (see decisions ledger)
    assert_allclose(p, -0.5 / r ** 2, rtol=1e-14)
    norms = smallness_norms(spec)
    assert abs(norms.M_d - 1) < 1e-12
    assert_allclose(norms.sphere_d, 1.0, rtol=1e-12)


def test_case_i_zero_winding_gives_constant_director():
    spec = make_case_i(1, -1, 0.7)
    pts = annulus_grid(GridSpec(), 2)
    u, p, d = spec.values(pts)
    assert_allclose(d, np.broadcast_to([math.cos(0.7), math.sin(0.7)], d.shape), atol=1e-15)
    r = np.linalg.norm(pts, axis=1)
    assert_allclose(p, -0.5 / r ** 2, rtol=1e-14)


def test_case_i_point_values():
    u, p, d = at(make_case_i(2, 1, 0), 1.0, 0.0)
    assert_allclose(u, [2, 0])
    assert p == pytest.approx(-4.0)
    assert_allclose(d, [1, 0])


def test_case_i_printed_pressure_is_not_a_solution_unless_unwound():
    bad = make_case_i(0, 0, 0, pressure_form="printed")
    assert momentum_residual(bad).sup > 1e-2
    same = make_case_i(1.5, -1, 0.2, pressure_form="printed")
    assert momentum_residual(same).sup < 1e-8


def test_case_i_integer_winding_required():
    with pytest.raises(InvalidParameter):
        make_case_i(1, 0.5, 0)
    with pytest.raises(InvalidParameter):
        make_case_i(float("nan"), 0, 0)


# ---------------------------------------------------------------- case (ii)

def test_case_ii_existence_boundary():
    spec = make_case_ii(5 * math.pi, 3, 0, 0, 0)
    assert spec.profile.degenerate
    with pytest.raises(NoExistence):
        make_case_ii(5 * math.pi + 0.1, 3, 0, 0, 0)


def test_case_ii_nontrivial_profile():
    spec = make_case_ii(0, 3, 0, 0, 0)
    f, v, q, xi = sample_profiles(spec, 384)
    assert abs(f.mean()) < 1e-10
    assert f.max() - f.min() > 1.0
    c = np.fft.rfft(f) / f.size
    assert abs(c[3]) > 1e-10
    off = [j for j in range(1, 100) if j % 3]
    assert np.abs(c[off]).max() < 1e-12
    assert reduced_system_residual(f, v, q, xi) < 1e-8


def test_case_ii_constant_profile_matches_case_i():
    # boundary cell: constant f = c0 with 2 pi c0 = Phi
    c0 = 2.5
    spec = make_case_ii(2 * math.pi * c0, 3, 1, 0.4, 0.3)
    ref = make_case_i(c0, 1, 0.3)
    pts = annulus_grid(GridSpec(), 2)
    u2, p2, d2 = spec.values(pts)
    u1, p1, d1 = ref.values(pts)
    assert_allclose(u2, u1, atol=1e-13)
    assert_allclose(d2, d1, atol=1e-13)
    r2 = np.sum(pts ** 2, axis=1)
    diff = (p2 - p1) * r2
    assert np.ptp(diff) < 1e-12
    assert verify(spec)[1]


def test_case_ii_pressure_constant_sign_is_forced_by_momentum():
    prof = solve_profile(math.pi, 3)
    m = 0
    good = make_case_ii(math.pi, 3, m, 0, 0, profile=prof)
    assert momentum_residual(good).sup < 1e-8
    flipped_C1 = ((m + 1) ** 2 - prof.lam) / 2
    bad = make_case_ii(math.pi, 3, m, 0, 0, profile=prof, C1=flipped_C1)
    assert momentum_residual(bad).sup > 1.0


def test_case_ii_uses_integrated_C1():
    prof = solve_profile(-8 * math.pi, 2)
    spec = make_case_ii(-8 * math.pi, 2, 2, 0, 0, profile=prof)
    C1_ode, C1_direct, _ = compute_C1(prof, 2)
    assert spec.C1 == C1_direct
    assert abs(C1_ode - C1_direct) < 1e-8


# ---------------------------------------------------------------- case (iii)

def test_case_iii_point_values():
    spec = make_case_iii(0, 1, 0)
    u, p, d = at(spec, 1.0, 0.0)
    assert_allclose(u, [0, 1], atol=1e-15)
    assert p == pytest.approx(-0.5)
    U, _, D = spec.jets(np.array([[1.0, 0.0]]))
    assert np.all(D.grad == 0)
    u, p, _ = at(make_case_iii(2 * math.pi, 1, 0), 0.0, 2.0)
    assert np.dot(u, u) == pytest.approx(0.5)
    assert p == pytest.approx(-0.25)


def test_case_iii_constant_director_and_head_pressure():
    spec = make_case_iii(1.3, -0.7, 2.0)
    pts = annulus_grid(GridSpec(), 2)
    u, p, d = spec.values(pts)
    assert_allclose(d, np.broadcast_to([math.cos(2.0), math.sin(2.0)], d.shape), atol=1e-15)
    assert np.abs(p + 0.5 * np.sum(u * u, axis=1)).max() < 1e-14
    assert smallness_norms(spec).M_d == 0


def test_case_iii_requires_swirl():
    with pytest.raises(InvalidParameter):
        make_case_iii(1, 0, 0)


# ---------------------------------------------------------------- Landau

def test_landau_infinite_parameter():
    spec = make_landau("inf")
    u, p, d = spec.values(annulus_grid(GridSpec(), 3))
    assert np.all(u == 0) and np.all(p == 0)
    assert spec.to_dict()["params"]["a"] == "inf"


def test_landau_axis_velocity_parallel_to_axis():
    u, _, _ = at(make_landau(2), 0.0, 0.0, 1.0)
    assert abs(u[0]) < 1e-15 and abs(u[1]) < 1e-15
    assert u[2] == pytest.approx(4.0)


@pytest.mark.parametrize("a", [1.0, 0.5, -3.0, float("nan")])
def test_landau_rejects_small_parameter(a):
    with pytest.raises(InvalidParameter):
        make_landau(a)


def test_landau_velocity_matches_stream_function_form():
    # oracle: u_r = d_phi(sin(phi) psi)/(r sin(phi)), u_phi = -psi/r, psi = 2 sin/(a - cos)
    a = 2.0
    spec = make_landau(a)
    rng = np.random.default_rng(3)
    phi = rng.uniform(0.1, math.pi - 0.1, 30)
    th = rng.uniform(0, 2 * math.pi, 30)
    r = rng.uniform(0.5, 2, 30)
    h = 1e-6

    def sin_psi(ph):
        return np.sin(ph) * 2 * np.sin(ph) / (a - np.cos(ph))

    ur = (sin_psi(phi + h) - sin_psi(phi - h)) / (2 * h) / (r * np.sin(phi))
    uphi = -2 * np.sin(phi) / (a - np.cos(phi)) / r
    e_r = np.stack([np.sin(phi) * np.cos(th), np.sin(phi) * np.sin(th), np.cos(phi)], 1)
    e_phi = np.stack([np.cos(phi) * np.cos(th), np.cos(phi) * np.sin(th), -np.sin(phi)], 1)
    u, _, _ = spec.values(r[:, None] * e_r)
    assert_allclose(u, ur[:, None] * e_r + uphi[:, None] * e_phi, atol=1e-8)


@pytest.mark.parametrize("a", [1.1, 2.0, 10.0])
def test_landau_pressure_matches_closed_form(a):
    # oracle: literature pressure 4 (a cos(phi) - 1) / (r^2 (a - cos(phi))^2)
    spec = make_landau(a)
    pts = annulus_grid(GridSpec(), 3)
    _, p, _ = spec.values(pts)
    r = np.linalg.norm(pts, axis=1)
    c = pts[:, 2] / r
    exact = 4 * (a * c - 1) / (r ** 2 * (a - c) ** 2)
    assert np.abs(p - exact).max() < 1e-10 * max(1.0, np.abs(exact).max())
    assert spec.certificate < 1e-5


def test_landau_fd_residuals():
    recs, ok = verify(make_landau(2), stencil=FD)
    by = {r.equation: r.sup for r in recs}
    assert by["momentum"] < 1e-6 and by["continuity"] < 1e-6 and ok


def test_landau_decay_in_parameter():
    pts = sphere_points(3, (64, 128))
    sups = [np.linalg.norm(make_landau(a).values(pts)[0], axis=1).max()
            for a in (1.1, 2, 10, 100, 1e6)]
    assert all(x > y for x, y in zip(sups, sups[1:]))
    assert sups[-1] < 1e-5


# ---------------------------------------------------------------- hedgehog / constant

def test_hedgehog_4d():
    spec = make_hedgehog(4)
    recs, ok = verify(spec)
    assert ok and max(r.sup for r in recs) < 1e-8
    assert smallness_norms(spec).M_d == pytest.approx(math.sqrt(3), abs=1e-12)


def test_hedgehog_3d_point():
    u, p, d = at(make_hedgehog(3), 1.0, 0.0, 0.0)
    assert_allclose(d, [1, 0, 0])
    assert p == pytest.approx(-1.0)
    assert np.all(u == 0)


def test_hedgehog_2d_equals_unit_winding_case_i():
    pts = annulus_grid(GridSpec(), 2)
    uh, ph, dh = make_hedgehog(2).values(pts)
    ui, pi_, di = make_case_i(0, 0, 0).values(pts)
    assert_allclose(dh, di, atol=1e-15)
    assert np.ptp((ph - pi_) * np.sum(pts ** 2, axis=1)) < 1e-14
    assert np.all(uh == ui)


def test_constant_director():
    spec = make_constant_director(4, [0, 0, 0, 1])
    recs, ok = verify(spec)
    assert ok and all(r.sup == 0 for r in recs)
    norms = smallness_norms(spec)
    assert (norms.M_u, norms.M_d) == (0, 0)
    with pytest.raises(NonUnitDirector):
        make_constant_director(3, [0, 0, 2])


# ---------------------------------------------------------------- shared invariants

def _all_specs():
    return [make_case_i(-1.5, 2, 0.3), make_case_ii(math.pi, 3, -2, 0.5, 1.0),
            make_case_iii(3.0, -1.2, 0.4), make_landau(1.1), make_landau(10), make_hedgehog(2),
            make_hedgehog(3), make_hedgehog(4), make_constant_director(3, [0.6, 0, 0.8])]


@pytest.fixture(scope="module")
def specs():
    return _all_specs()


def test_self_similarity(specs):
    for spec in specs:
        assert scaling_check(spec, (0.5, 2.0, 10.0)).sup < 1e-10, spec.family


def test_unit_length(specs):
    for spec in specs:
        assert unit_length_check(spec).sup < 1e-12, spec.family


def test_divergence_free(specs):
    from steady_el.residual import continuity_residual
    for spec in specs:
        assert continuity_residual(spec).sup < 1e-8, spec.family
        assert continuity_residual(spec, stencil=FD).sup < 1e-6, spec.family


def test_json_round_trip(specs):
    pts = annulus_grid(GridSpec(n_radial=3), 2)
    for spec in specs:
        doc = json.loads(json.dumps(spec.to_dict()))
        back = from_dict(doc)
        assert back.family == spec.family and back.dim == spec.dim
        pts = annulus_grid(GridSpec(n_radial=3), spec.dim)
        for a, b in zip(spec.values(pts), back.values(pts)):
            assert_allclose(a, b, rtol=1e-13, atol=1e-13)
        assert ("profile" in doc) == (spec.family in ("case_ii", "custom_profile"))


@pytest.mark.parametrize("doc", [
    [], {"family": "vortex", "dim": 2, "params": {}},
    {"family": "case_i", "dim": 3, "params": {"c": 1, "m": 0, "theta0": 0}},
    {"family": "case_i", "dim": 2, "params": {"c": 1, "m": 0}},
    {"family": "case_i", "dim": 2, "params": {"c": 1, "m": 0, "theta0": 0, "zeta": 1}},
    {"family": "case_ii", "dim": 2, "params": {"Phi": 0, "k": 3, "m": 0, "theta1": 0,
                                               "theta2": 0}},
    {"family": "hedgehog", "dim": 3, "params": {}, "profile": {"fourier_cos": [0.0]}},
])
def test_from_dict_rejects_malformed(doc):
    with pytest.raises(ValidationError):
        from_dict(doc)


def test_custom_profile_from_solved_data():
    prof = solve_profile(0, 3)
    C1 = compute_C1(prof, 1)[1]
    spec = make_custom_profile(prof, C1, 1, 0.2, 0.1)
    assert verify(spec)[1]
    back = from_dict(json.loads(json.dumps(spec.to_dict())))
    assert back.family == "custom_profile"


# ---------------------------------------------------------------- classification

def test_classify_examples():
    fam, par = classify_profile(*sample_profiles(make_case_iii(1, 2, 0)))
    assert fam == "case_iii"
    assert abs(par["Psi"] - 1) < 1e-8 and abs(par["mu"] - 2) < 1e-8
    fam, par = classify_profile(*sample_profiles(make_case_i(3, 2, 0.5)))
    assert fam == "case_i" and par["m"] == 2 and abs(par["c"] - 3) < 1e-8
    assert abs(par["theta0"] - 0.5) < 1e-8


def test_classify_rejects_swirl_with_winding():
    th = 2 * np.pi * np.arange(128) / 128
    f = np.zeros_like(th)
    v = np.ones_like(th)
    q = np.full_like(th, -0.5)
    with pytest.raises(Unclassifiable):
        classify_profile(f, v, q, 2 * th)


def test_classify_rejects_non_solutions():
    f, v, q, xi = sample_profiles(make_case_i(1, 0, 0))
    with pytest.raises(Unclassifiable):
        classify_profile(f, v, q + 0.3, xi)


def _phase_diff(a, b, period=2 * math.pi):
    return abs((a - b + period / 2) % period - period / 2)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.integers(-4, 4), st.floats(0, 2 * math.pi))
def test_classify_round_trip_case_i(c, m, theta0):
    fam, par = classify_profile(*sample_profiles(make_case_i(c, m, theta0), 128))
    assert fam == "case_i"
    assert par["m"] == m and abs(par["c"] - c) < 1e-8
    assert _phase_diff(par["theta0"], theta0) < 1e-8


@settings(max_examples=100, deadline=None)
@given(st.floats(-20, 20), st.floats(0.05, 5) | st.floats(-5, -0.05), st.floats(0, 2 * math.pi))
def test_classify_round_trip_case_iii(Psi, mu, theta3):
    fam, par = classify_profile(*sample_profiles(make_case_iii(Psi, mu, theta3), 128))
    assert fam == "case_iii"
    assert abs(par["Psi"] - Psi) < 1e-8 * max(1, abs(Psi))
    assert abs(par["mu"] - mu) < 1e-8 * max(1, abs(mu))
    assert _phase_diff(par["theta3"], theta3) < 1e-8


_PROFILES = {}


def _profile(Phi_over_pi, k):
    key = (Phi_over_pi, k)
    if key not in _PROFILES:
        _PROFILES[key] = solve_profile(Phi_over_pi * math.pi, k)
    return _PROFILES[key]


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([(0, 3), (-8, 2), (1, 3), (10, 4), (-4, 1), (4, 4)]),
       st.integers(-3, 3), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_classify_round_trip_case_ii(cell, m, theta1, theta2):
    q, k = cell
    spec = make_case_ii(q * math.pi, k, m, theta1, theta2, profile=_profile(q, k))
    fam, par = classify_profile(*sample_profiles(spec, 512))
    assert fam == "case_ii"
    assert par["k"] == k and par["m"] == m
    assert abs(par["Phi"] - q * math.pi) < 1e-8 * max(1, abs(q))
    assert _phase_diff(par["theta1"], theta1, 2 * math.pi / k) < 1e-6
    assert _phase_diff(par["theta2"], theta2) < 1e-8
