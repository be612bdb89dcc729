"""Pointwise verification of (u, p, d) triples on annulus grids.

The steady system checked here is

    -Lap u + u.grad u + grad p + div(grad d (.) grad d) = 0,
    div u = 0,
    Lap d + |grad d|^2 d = u.grad d,   |d| = 1,

with the stress divergence expanded as d_j(d_i d_a d_j d_a)
= d_i d_j d_a d_j d_a + d_i d_a Lap d_a, which is valid for any d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IncompatibleField, NotSelfSimilar, ValidationError
from .grid import GridSpec, annulus_grid, sphere_points
from .jets import Jet
from .stencil import StencilConfig, stencil_jet

EQUATIONS = ("momentum", "continuity", "director", "unit_length", "scaling",
             "advected_hm_sphere")
ANALYTIC_TOL = 1e-8
FD_TOL = 1e-6
UNIT_TOL = 1e-12
SCALING_TOL = 1e-10
CERTIFICATE_TOL = 1e-5


@dataclass
class ResidualRecord:
    equation: str
    sup: float
    rms: float
    worst_point: list
    grid: dict
    mode: str

    def to_dict(self):
        return {"equation": self.equation, "sup": self.sup, "rms": self.rms,
                "worst_point": self.worst_point, "grid": self.grid, "mode": self.mode}


@dataclass
class SmallnessNorms:
    M_u: float
    M_d: float
    radii: np.ndarray
    sphere_u: np.ndarray
    sphere_d: np.ndarray

    @property
    def radial_spread(self):
        """Largest relative variation of the per-sphere values across radii."""
        out = 0.0
        for prof in (self.sphere_u, self.sphere_d):
            top = prof.max()
            if top > 0:
                out = max(out, (prof.max() - prof.min()) / top)
        return out

    def to_dict(self):
        return {"M_u": self.M_u, "M_d": self.M_d, "radii": self.radii.tolist(),
                "sphere_u": self.sphere_u.tolist(), "sphere_d": self.sphere_d.tolist()}


def _mode(stencil):
    return "forced-fd" if stencil is not None and stencil.use_fd else "analytic"


def _record(equation, pointwise, points, grid_dict, mode):
    pointwise = np.asarray(pointwise, dtype=float)
    if pointwise.ndim > 1:
        pointwise = np.sqrt(np.sum(pointwise * pointwise, axis=tuple(range(1, pointwise.ndim))))
    i = int(np.argmax(pointwise))
    return ResidualRecord(equation, float(pointwise[i]),
                          float(np.sqrt(np.sum(pointwise * pointwise) / pointwise.size)),
                          [float(x) for x in points[i]], grid_dict, mode)


def _lap(J):
    return np.trace(J.hess, axis1=-2, axis2=-1)


def stress_divergence(D: Jet):
    """div(grad d (.) grad d) from a second-order director jet."""
    return (np.einsum("naij,naj->ni", D.hess, D.grad)
            + np.einsum("nai,na->ni", D.grad, _lap(D)))


def momentum_field(U, P, D):
    adv = np.einsum("nj,nij->ni", U.value, U.grad)
    return -_lap(U) + adv + P.grad + stress_divergence(D)


def continuity_field(U):
    return np.trace(U.grad, axis1=-2, axis2=-1)


def director_field(U, D, advect=None):
    """Lap d + |grad d|^2 d - w.grad d with w = u unless ``advect`` is given."""
    w = U.value if advect is None else advect
    gd2 = np.sum(D.grad * D.grad, axis=(-2, -1))
    return _lap(D) + gd2[:, None] * D.value - np.einsum("nj,naj->na", w, D.grad)


def pressure_gradient(u_fn, d_fn, points):
    """grad p = Lap u - u.grad u - div(grad d (.) grad d) from analytic jets."""
    X = Jet.variable(np.asarray(points))
    U, D = u_fn(X), d_fn(X)
    return _lap(U) - np.einsum("nj,nij->ni", U.value, U.grad) - stress_divergence(D)


# ---------------------------------------------------------------------------
# residual operations

def _grid_points(spec, grid):
    grid = grid or GridSpec()
    return grid, annulus_grid(grid, spec.dim)


def _field_jets(spec, points, stencil):
    return spec.jets(points, stencil)


def _momentum(pts, jets):
    return momentum_field(*jets)


def _continuity(pts, jets):
    return np.abs(continuity_field(jets[0]))


def _director(pts, jets):
    return director_field(jets[0], jets[2])


_POINTWISE = {"momentum": _momentum, "continuity": _continuity, "director": _director}


def _pde_residuals(spec, names, grid, stencil):
    grid, pts = _grid_points(spec, grid)
    jets = _field_jets(spec, pts, stencil)
    return [_record(name, _POINTWISE[name](pts, jets), pts, grid.to_dict(spec.dim),
                    _mode(stencil)) for name in names]


def momentum_residual(spec, grid: GridSpec | None = None, stencil: StencilConfig | None = None):
    """-Lap u + u.grad u + grad p + div(grad d (.) grad d)."""
    return _pde_residuals(spec, ["momentum"], grid, stencil)[0]


def continuity_residual(spec, grid: GridSpec | None = None, stencil: StencilConfig | None = None):
    return _pde_residuals(spec, ["continuity"], grid, stencil)[0]


def director_residual(spec, grid: GridSpec | None = None, stencil: StencilConfig | None = None):
    """Lap d + |grad d|^2 d - u.grad d."""
    return _pde_residuals(spec, ["director"], grid, stencil)[0]


def unit_length_check(spec, grid: GridSpec | None = None):
    grid, pts = _grid_points(spec, grid)
    _, _, d = spec.values(pts)
    defect = np.abs(np.linalg.norm(d, axis=-1) - 1)
    return _record("unit_length", defect, pts, grid.to_dict(spec.dim), "analytic")


def scaling_check(spec, lambdas=(0.5, 2.0, 10.0), grid: GridSpec | None = None):
    """Max deviation from u = lam u(lam x), p = lam^2 p(lam x), d = d(lam x)."""
    lambdas = [float(lam) for lam in lambdas]
    if any(not lam > 0 for lam in lambdas):
        raise ValidationError("scaling factors must be positive")
    grid, pts = _grid_points(spec, grid)
    u, p, d = spec.values(pts)
    dev = np.zeros(len(pts))
    for lam in lambdas:
        us, ps, ds = spec.values(lam * pts)
        dev = np.maximum(dev, np.max(np.abs(lam * us - u), axis=-1))
        dev = np.maximum(dev, np.abs(lam * lam * ps - p))
        dev = np.maximum(dev, np.max(np.abs(ds - d), axis=-1))
    return _record("scaling", dev, pts, grid.to_dict(spec.dim), "analytic")


def sphere_director_residual(spec, sphere_resolution=None, stencil: StencilConfig | None = None):
    """Advected harmonic-map equation on the unit sphere with v = u - <u, x> x.

    For degree-0 homogeneous d the ambient Laplacian and gradient at |x| = 1
    restrict to the intrinsic ones, so the ambient operators are used there.
    """
    if not spec.is_self_similar or scaling_check(spec).sup > SCALING_TOL:
        raise NotSelfSimilar(f"{spec.family} spec fails the scaling law")
    from .grid import DEFAULT_ANGULAR
    res = tuple(sphere_resolution or DEFAULT_ANGULAR[spec.dim])
    pts = sphere_points(spec.dim, res)
    U, _, D = _field_jets(spec, pts, stencil)
    v = U.value - np.sum(U.value * pts, axis=-1, keepdims=True) * pts
    out = director_field(U, D, advect=v)
    return _record("advected_hm_sphere", out, pts, {"sphere_resolution": list(res)},
                   _mode(stencil))


def threshold(stencil: StencilConfig | None):
    return FD_TOL if stencil is not None and stencil.use_fd else ANALYTIC_TOL


def verify(spec, grid: GridSpec | None = None, stencil: StencilConfig | None = None):
    """All pointwise checks; returns (records, passed)."""
    recs = _pde_residuals(spec, ["momentum", "continuity", "director"], grid, stencil)
    recs += [unit_length_check(spec, grid), scaling_check(spec, grid=grid)]
    tol = threshold(stencil)
    limits = {"unit_length": UNIT_TOL, "scaling": SCALING_TOL}
    passed = all(r.sup < limits.get(r.equation, tol) for r in recs)
    return recs, passed


# ---------------------------------------------------------------------------
# scale-invariant norms

def smallness_norms(spec, grid: GridSpec | None = None):
    grid, pts = _grid_points(spec, grid)
    U, _, D = spec.jets(pts)
    r = np.linalg.norm(pts, axis=-1)
    nu = r * np.linalg.norm(U.value, axis=-1)
    nd = r * np.sqrt(np.sum(D.grad * D.grad, axis=(-2, -1)))
    nr = grid.n_radial
    su = nu.reshape(nr, -1).max(axis=1)
    sd = nd.reshape(nr, -1).max(axis=1)
    return SmallnessNorms(float(su.max()), float(sd.max()), grid.radii(), su, sd)


def _third_derivative_d(spec, pts):
    """grad^3 d by central differences of the analytic Hessian."""
    def hess(x):
        return spec.director(Jet.variable(np.asarray(x, dtype=float))).hess
    return stencil_jet(hess, pts, StencilConfig(), hessian=False).grad


def decay_estimate_check(spec, orders=(0, 1, 2), grid: GridSpec | None = None):
    """Per-sphere sups of |x|^{k+1}|grad^k u|, |x|^{k+2}|grad^k p|, |x|^{k+1}|grad^{k+1} d|."""
    grid, pts = _grid_points(spec, grid)
    U, P, D = spec.jets(pts)
    r = np.linalg.norm(pts, axis=-1)
    nr = grid.n_radial
    tensors_u = [U.value, U.grad, U.hess]
    tensors_p = [P.value, P.grad, P.hess]
    tensors_d = [D.grad, D.hess]

    def fro(a):
        a = np.asarray(a, dtype=float).reshape(len(pts), -1)
        return np.sqrt(np.sum(a * a, axis=1))

    rows = []
    for k in orders:
        k = int(k)
        if k not in (0, 1, 2):
            raise ValidationError("decay orders must lie in {0, 1, 2}")
        td = tensors_d[k] if k < 2 else _third_derivative_d(spec, pts)
        cu = (r ** (k + 1) * fro(tensors_u[k])).reshape(nr, -1).max(axis=1)
        cp = (r ** (k + 2) * fro(tensors_p[k])).reshape(nr, -1).max(axis=1)
        cd = (r ** (k + 1) * fro(td)).reshape(nr, -1).max(axis=1)

        def spread(c):
            top = c.max()
            return float((c.max() - c.min()) / top) if top > 0 else 0.0

        rows.append({"order": k, "u": cu.tolist(), "p": cp.tolist(), "d": cd.tolist(),
                     "sup_u": float(cu.max()), "sup_p": float(cp.max()),
                     "sup_d": float(cd.max()),
                     "spread": max(spread(cu), spread(cp), spread(cd))})
    return {"radii": grid.radii().tolist(), "rows": rows}


# ---------------------------------------------------------------------------
# pressure from the momentum equation

_GL_NODES = 128


def _great_circle(a, b):
    """Unit tangent at ``a`` towards ``b`` and the angle between them."""
    c = float(np.clip(a @ b, -1.0, 1.0))
    w = b - c * a
    nw = np.linalg.norm(w)
    if nw < 1e-14:
        if c > 0:
            return a * 0.0, 0.0
        # antipodal: any perpendicular direction, chosen deterministically
        e = np.zeros_like(a)
        e[int(np.argmin(np.abs(a)))] = 1.0
        w = e - (e @ a) * a
        nw = np.linalg.norm(w)
    return w / nw, math.atan2(nw, c)


def curl_certificate(u_fn, d_fn, n, grid: GridSpec | None = None,
                     stencil: StencilConfig = StencilConfig()):
    """Relative sup of the antisymmetric part of the Jacobian of grad p.

    Path independence of the recovered pressure is equivalent to this
    vanishing; it is normalized by max(1, sup |Jacobian|).
    """
    grid = grid or GridSpec(n_radial=4)
    pts = annulus_grid(grid, n)
    J = stencil_jet(lambda x: pressure_gradient(u_fn, d_fn, x), pts, stencil,
                    hessian=False).grad
    anti = 0.5 * (J - np.swapaxes(J, -1, -2))
    return float(np.abs(anti).max() / max(1.0, np.abs(J).max()))


def pressure_recovery(u_fn, d_fn, base_point, points, *, base_value=0.0, certify=True,
                      stencil: StencilConfig = StencilConfig()):
    """Pressure at ``points`` by integrating grad p from ``base_point``.

    The path runs radially from the base point to the target radius and
    then along the great circle to the target.  Each leg uses
    Gauss-Legendre quadrature.  Returns ``(values, certificate)``; the
    certificate is None unless ``certify`` and raises
    :class:`IncompatibleField` above the acceptance tolerance.
    """
    base = np.asarray(base_point, dtype=float)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    rb = np.linalg.norm(base)
    if rb == 0:
        raise ValidationError("base point must not be the origin")
    bhat = base / rb
    z, w = np.polynomial.legendre.leggauss(_GL_NODES)
    s = 0.5 * (z + 1)
    w = 0.5 * w
    path, weights = [], []
    for x in points:
        rx = np.linalg.norm(x)
        # radial leg: y(s) = (rb + s (rx - rb)) bhat
        rad = (rb + s * (rx - rb))[:, None] * bhat
        path.append(rad)
        weights.append((w * (rx - rb))[:, None] * bhat)
        t, ang = _great_circle(bhat, x / rx)
        phi = s * ang
        arc = rx * (np.cos(phi)[:, None] * bhat + np.sin(phi)[:, None] * t)
        tang = rx * ang * (-np.sin(phi)[:, None] * bhat + np.cos(phi)[:, None] * t)
        path.append(arc)
        weights.append(w[:, None] * tang)
    P = np.concatenate(path)
    W = np.concatenate(weights)
    g = pressure_gradient(u_fn, d_fn, P)
    contrib = np.sum(g * W, axis=-1).reshape(len(points), -1)
    values = base_value + contrib.sum(axis=1)
    cert = None
    if certify:
        n = points.shape[1]
        cert = curl_certificate(u_fn, d_fn, n, stencil=stencil)
        if cert >= CERTIFICATE_TOL:
            raise IncompatibleField(f"grad p is not a gradient (certificate {cert:.2e})")
    return values, cert
