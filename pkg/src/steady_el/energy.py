"""Energy identity, boundary flux, and harmonic-map monotonicity quantities.

Notation: H = |grad d|^2/2 + |u|^2/2 + p is the head pressure and

    h(tau) = int_{|x|=tau} <u, d_r u> - H <u, x/|x|> dsigma

its flux.  For exact solutions the annulus dissipation
int_{r<|x|<R} |grad u|^2 + |Lap d + |grad d|^2 d|^2 equals h(R) - h(r).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergentEnergy, NotASolution, ValidationError
from .grid import GridSpec, sphere_quadrature
from .jets import Jet
from .residual import director_field, verify
from .stencil import StencilConfig

SOLUTION_TOL = 1e-4
DEFAULT_QUAD_RES = {2: 32, 3: 32, 4: 16}
RADIAL_NODES = 32


def _quad(n, quadrature):
    return quadrature if quadrature is not None else sphere_quadrature(n, DEFAULT_QUAD_RES[n])


def _grad_d_sq(D):
    return np.sum(D.grad * D.grad, axis=(-2, -1))


def head_pressure(spec, points, stencil: StencilConfig | None = None):
    """H(x) = |grad d|^2/2 + |u|^2/2 + p at each point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    U, P, D = spec.jets(pts, stencil)
    return 0.5 * _grad_d_sq(D) + 0.5 * np.sum(U.value ** 2, axis=-1) + P.value


def boundary_flux_h(spec, tau, quadrature=None, stencil: StencilConfig | None = None):
    """h(tau); d_r u is the radial directional derivative of the velocity jet."""
    tau = float(tau)
    if not tau > 0:
        raise ValidationError("tau must be positive")
    q = _quad(spec.dim, quadrature)
    pts = tau * q.nodes
    U, P, D = spec.jets(pts, stencil)
    u = U.value
    dru = np.einsum("nij,nj->ni", U.grad, q.nodes)
    H = 0.5 * _grad_d_sq(D) + 0.5 * np.sum(u * u, axis=-1) + P.value
    integrand = np.sum(u * dru, axis=-1) - H * np.sum(u * q.nodes, axis=-1)
    return float(q.integrate(integrand, radius=tau))


def _radial_rule(r, R, m=RADIAL_NODES):
    """Gauss-Legendre nodes in log(rho) on [r, R]; weights include d rho = rho d log rho."""
    z, w = np.polynomial.legendre.leggauss(m)
    a, b = math.log(r), math.log(R)
    s = 0.5 * (b - a) * z + 0.5 * (a + b)
    rho = np.exp(s)
    return rho, 0.5 * (b - a) * w * rho


def dissipation_density(U, D):
    tension = director_field(U, D, advect=np.zeros_like(U.value))
    return np.sum(U.grad ** 2, axis=(-2, -1)) + np.sum(tension ** 2, axis=-1)


def dissipation(spec, r, R, quadrature=None, radial_nodes=RADIAL_NODES,
                stencil: StencilConfig | None = None):
    """int over r < |x| < R of |grad u|^2 + |Lap d + |grad d|^2 d|^2."""
    r, R = float(r), float(R)
    if not 0 < r < R:
        raise ValidationError("need 0 < r < R")
    q = _quad(spec.dim, quadrature)
    rho, wr = _radial_rule(r, R, radial_nodes)
    total = 0.0
    for rk, wk in zip(rho, wr):
        U, _, D = spec.jets(rk * q.nodes, stencil)
        total += wk * q.integrate(dissipation_density(U, D), radius=rk)
    return float(total)


@dataclass
class EnergyReport:
    radii: list
    h_values: list
    r: float
    R: float
    dissipation: float
    h_gap: float
    identity_gap: float
    head_pressure_samples: list = field(default_factory=list)
    monotone: bool = True

    @property
    def passed(self):
        return abs(self.identity_gap) <= max(1e-4 * abs(self.dissipation), 1e-8)

    def to_dict(self):
        return {"radii": self.radii, "h": self.h_values, "dissipation": self.dissipation,
                "h_gap": self.h_gap, "identity_gap": self.identity_gap,
                "r": self.r, "R": self.R, "monotone": self.monotone,
                "head_pressure_samples": self.head_pressure_samples,
                "passed": self.passed}


def energy_balance(spec, r=0.5, R=2.0, radii=(0.5, 1.0, 2.0, 4.0), quadrature=None,
                   grid: GridSpec | None = None, check=True):
    """Dissipation against h(R) - h(r) plus the h-ladder over ``radii``.

    Raises :class:`NotASolution` when a PDE residual exceeds 1e-4.
    """
    if check:
        recs, _ = verify(spec, grid)
        worst = max((rec for rec in recs if rec.equation in ("momentum", "continuity",
                                                              "director")),
                    key=lambda rec: rec.sup)
        if worst.sup > SOLUTION_TOL:
            raise NotASolution(f"{worst.equation} residual {worst.sup:.3e} exceeds {SOLUTION_TOL}")
    q = _quad(spec.dim, quadrature)
    radii = sorted(float(x) for x in radii)
    h = [boundary_flux_h(spec, t, q) for t in radii]
    diss = dissipation(spec, r, R, q)
    gap = boundary_flux_h(spec, R, q) - boundary_flux_h(spec, r, q)
    scale = max(abs(x) for x in h) if h else 0.0
    monotone = all(b >= a - 1e-10 * max(1.0, scale) for a, b in zip(h, h[1:]))
    samples = head_pressure(spec, q.nodes[:4]).tolist()
    return EnergyReport(radii, h, r, R, diss, gap, diss - gap, samples, monotone)


def pointwise_energy_identity_residual(spec, points, stencil: StencilConfig | None = None):
    """|grad u|^2 + |tension|^2 - Lap(|u|^2/2) + u.grad H at each point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    U, P, D = spec.jets(pts, stencil)
    u = U.value
    gu2 = np.sum(U.grad ** 2, axis=(-2, -1))
    lap_u = np.trace(U.hess, axis1=-2, axis2=-1)
    lap_kinetic = gu2 + np.sum(u * lap_u, axis=-1)
    grad_H = (np.einsum("naj,najk->nk", D.grad, D.hess)
              + np.einsum("ni,nik->nk", u, U.grad) + P.grad)
    tension = director_field(U, D, advect=np.zeros_like(u))
    return gu2 + np.sum(tension ** 2, axis=-1) - lap_kinetic + np.sum(u * grad_H, axis=-1)


# ---------------------------------------------------------------------------
# harmonic maps into spheres

def _director_fn(d):
    return getattr(d, "director", d)


def _shell(d_fn, rho, q):
    """int_{|x| = rho} |grad d|^2 dsigma for each radius in ``rho``."""
    out = np.empty(len(rho))
    for i, rk in enumerate(rho):
        D = d_fn(Jet.variable(rk * q.nodes))
        out[i] = q.integrate(_grad_d_sq(D), radius=rk)
    return out


def hm_energy_density(d, r, n, quadrature=None, cutoff=1e-6, radial_nodes=48):
    """r^{2-n} int_{B_r} |grad d|^2 for a map d into the sphere.

    The ball is integrated from ``cutoff * r``; below that the shell
    integral is extended as the power law measured over the first decade,
    which is exact (rho^{n-3}) for degree-0 maps.
    """
    d_fn = _director_fn(d)
    r = float(r)
    if not r > 0:
        raise ValidationError("r must be positive")
    q = _quad(n, quadrature)
    eps = cutoff * r
    s_eps = _shell(d_fn, [eps, 10 * eps], q)
    tail = 0.0
    if s_eps[0] > 0:
        # shell integrals behave like rho^beta near the origin; degree-0 maps give n - 3
        beta = math.log10(s_eps[1] / s_eps[0])
        if beta <= -1 + 1e-3:
            raise DivergentEnergy(f"|grad d|^2 is not integrable at the origin in n={n}")
        tail = s_eps[0] * eps / (beta + 1)
    rho, w = _radial_rule(eps, r, radial_nodes)
    body = float(np.sum(w * _shell(d_fn, rho, q)))
    return r ** (2 - n) * (body + tail)


def radial_derivative_energy(d, R, n, quadrature=None):
    """2 R^{2-n} int_{|x| = R} |d d/d|x||^2 dsigma."""
    d_fn = _director_fn(d)
    q = _quad(n, quadrature)
    D = d_fn(Jet.variable(R * q.nodes))
    dr = np.einsum("naj,nj->na", D.grad, q.nodes)
    return 2 * R ** (2 - n) * float(q.integrate(np.sum(dr * dr, axis=-1), radius=R))


@dataclass
class MonotonicityReport:
    radii: list
    ladder: list
    slopes: list
    rhs: list
    nondecreasing: bool
    strictly_increasing: bool
    max_slope_mismatch: float
    slope_match: bool

    def to_dict(self):
        return dict(self.__dict__)


def hm_monotonicity_scan(d, radii, n, quadrature=None, rel_step=1e-3, slope_tol=1e-4):
    """Energy ladder over ``radii`` with a slope cross-check.

    The slope of R^{2-n} int_{B_R} |grad d|^2 is taken by a 4th-order
    central difference in R and compared with the surface integral
    2 R^{2-n} int_{|x|=R} |d_r d|^2.
    """
    radii = [float(x) for x in radii]
    if any(not x > 0 for x in radii) or sorted(radii) != radii:
        raise ValidationError("radii must be positive and increasing")
    q = _quad(n, quadrature)
    ladder = [hm_energy_density(d, R, n, q) for R in radii]
    slopes, rhs, mism = [], [], 0.0
    for R in radii:
        h = rel_step * R
        e = [hm_energy_density(d, R + k * h, n, q) for k in (-2, -1, 1, 2)]
        slope = (e[0] - 8 * e[1] + 8 * e[2] - e[3]) / (12 * h)
        right = radial_derivative_energy(d, R, n, q)
        slopes.append(slope)
        rhs.append(right)
        scale = max(abs(right), abs(slope))
        floor = 1e-8 * max(1.0, abs(ladder[0]))
        if scale > floor:
            mism = max(mism, abs(slope - right) / scale)
    top = max(1.0, max(abs(x) for x in ladder))
    nondecr = all(b >= a - 1e-8 * top for a, b in zip(ladder, ladder[1:]))
    strict = all(b > a + 1e-8 * top for a, b in zip(ladder, ladder[1:]))
    return MonotonicityReport(radii, ladder, slopes, rhs, nondecr, strict, mism,
                              mism <= slope_tol)


def radial_bump(r_in, r_out, kind="radial"):
    """Compactly supported vector field Y = eta(|x|) V(x).

    ``kind`` selects V: ``radial`` (x), ``axis<k>`` (e_k), ``stretch<k>``
    (x_k e_k) or ``shear<j><k>`` (x_j e_k).  The profile is
    eta(rho) = exp(-1/((rho - r_in)(r_out - rho))) scaled to unit peak.
    Radial and constant-direction fields annihilate the identity for every
    degree-0 map in n = 3, so anisotropic fields are needed to detect
    non-stationary homogeneous maps.
    """
    if not 0 < r_in < r_out:
        raise ValidationError("need 0 < r_in < r_out")
    peak = math.exp(4.0 / (r_out - r_in) ** 2)

    def Y(X):
        rho = (X * X).sum().sqrt()
        gap = (rho - r_in) * (rho * -1.0 + r_out)
        eta = (gap.reciprocal() * -1.0).exp() * peak
        if kind == "radial":
            return X * eta.expand()
        e = np.zeros(X.shape[-1])
        if kind.startswith("axis"):
            e[int(kind[4:])] = 1.0
            return eta.expand() * e
        if kind.startswith("stretch"):
            k = int(kind[7:])
            e[k] = 1.0
            return (eta * X[k]).expand() * e
        if kind.startswith("shear"):
            j, k = int(kind[5]), int(kind[6])
            e[k] = 1.0
            return (eta * X[j]).expand() * e
        raise ValidationError(f"unknown bump kind {kind!r}")

    Y.support = (r_in, r_out)
    return Y


def bump_battery(n, r_in=0.5, r_out=2.0):
    kinds = (["radial"] + [f"axis{k}" for k in range(n)] + [f"stretch{k}" for k in range(n)]
             + [f"shear{j}{k}" for j in range(n) for k in range(n) if j != k])
    return [radial_bump(r_in, r_out, kind) for kind in kinds]


def stationarity_identity_check(d, Y, n, quadrature=None, radial_nodes=64):
    """|int |grad d|^2 div Y - 2 <d_i d, d_j d> d_j Y^i| over the support of Y."""
    d_fn = _director_fn(d)
    r_in, r_out = Y.support
    q = _quad(n, quadrature)
    z, w = np.polynomial.legendre.leggauss(radial_nodes)
    rho = 0.5 * (r_out - r_in) * z + 0.5 * (r_out + r_in)
    w = 0.5 * (r_out - r_in) * w
    total = 0.0
    for rk, wk in zip(rho, w):
        X = Jet.variable(rk * q.nodes)
        D, Yj = d_fn(X), Y(X)
        G = np.einsum("nai,naj->nij", D.grad, D.grad)
        divY = np.trace(Yj.grad, axis1=-2, axis2=-1)
        integrand = np.trace(G, axis1=-2, axis2=-1) * divY - 2 * np.einsum("nij,nij->n", G, Yj.grad)
        total += wk * q.integrate(integrand, radius=rk)
    return abs(float(total))
