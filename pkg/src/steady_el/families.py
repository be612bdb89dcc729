"""Explicit self-similar solution families packaged as :class:`SolutionSpec`.

Every family is written once as a function of a coordinate :class:`Jet`,
which gives values plus analytic first and second derivatives, and is
evaluated on order-0 jets (values only, possibly ``longdouble``) when the
finite-difference stencils need samples.

Families (n = dimension):

``case_i``      n=2, radial source/sink u = c x/|x|^2 with a winding director.
``case_ii``     n=2, u = f(theta+theta1) x/|x|^2 with a periodic profile f.
``case_iii``    n=2, source plus swirl with a constant director.
``landau``      n=3, the axisymmetric jet family with a constant director.
``hedgehog``    any n, u = 0 and d = x/|x|.
``constant_director``  the rigid state.
``custom_profile``     case_ii with a user-supplied Fourier profile.

Pressures are the ones that make each triple an exact solution.  For the
winding-director family this is p = -(c^2 + (m+1)^2)/(2|x|^2); the form
((m+1)^2 - c^2)/(2|x|^2) found in the literature is available through
``params["pressure_form"] = "printed"`` and is not a solution for m != -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable

import numpy as np

from . import jets
from .errors import (InvalidParameter, NonUnitDirector, Unclassifiable, ValidationError)
from .jets import Jet
from .profile import ProfileSolution, ShootingConfig, compute_C1, solve_profile
from .stencil import StencilConfig, stencil_jet

FAMILIES = ("case_i", "case_ii", "case_iii", "landau", "hedgehog", "constant_director",
            "custom_profile")
PERTURBATION_KEYS = ("pressure_scale", "velocity_shift", "director_shift", "pressure_form")

FieldFn = Callable[[Jet], Jet]


@dataclass(frozen=True, eq=False)
class SolutionSpec:
    family: str
    dim: int
    params: dict
    velocity: FieldFn = field(repr=False)
    pressure: FieldFn = field(repr=False)
    director: FieldFn = field(repr=False)
    profile: ProfileSolution | None = None
    C1: float | None = None
    certificate: float | None = None

    def jets(self, points, stencil: StencilConfig | None = None):
        """(u, p, d) jets at ``points``: analytic unless the stencil forces FD."""
        points = np.asarray(points, dtype=float)
        if stencil is not None and stencil.use_fd:
            return tuple(stencil_jet(self.sampler(f), points, stencil)
                         for f in (self.velocity, self.pressure, self.director))
        X = Jet.variable(points)
        return self.velocity(X), self.pressure(X), self.director(X)

    def values(self, points):
        X = Jet.variable(np.asarray(points), order=0)
        return self.velocity(X).value, self.pressure(X).value, self.director(X).value

    @staticmethod
    def sampler(fn):
        """Array-in/array-out wrapper of a jet field, for the stencils."""
        return lambda pts: fn(Jet.variable(pts, order=0)).value

    @property
    def is_self_similar(self):
        return "velocity_shift" not in self.params

    def to_dict(self):
        params = {}
        for key, val in self.params.items():
            if isinstance(val, float) and math.isinf(val):
                val = "inf" if val > 0 else "-inf"
            elif isinstance(val, np.ndarray):
                val = [float(x) for x in val]
            params[key] = val
        out = {"family": self.family, "dim": self.dim, "params": params}
        if self.profile is not None:
            out["profile"] = self.profile.to_dict(self.C1)
        return out


# ---------------------------------------------------------------------------
# building blocks

def _r2(X):
    return (X * X).sum()


def _radial_over_r2(X, coef):
    """coef * x/|x|^2 for a scalar jet (or number) ``coef``."""
    return X * (_r2(X).reciprocal() * coef).expand()


def _winding_director(X, m, phase):
    """(cos((m+1)theta + phase), sin((m+1)theta + phase)) in Cartesian components."""
    w = m + 1
    if w == 0:
        return X.constant_like(np.array([math.cos(phase), math.sin(phase)]))
    ang = jets.atan2(X[1], X[0]) * float(w) + phase
    return Jet.stack([ang.cos(), ang.sin()])


def _zero_vector(X):
    return X.constant_like(np.zeros(X.shape[-1]))


def _zero_scalar(X):
    return X.constant_like(0.0)


def _normalize(D):
    return D * jets.norm(D).reciprocal().expand()


def _finite(name, x):
    try:
        x = float(x)
    except (TypeError, ValueError) as exc:
        raise InvalidParameter(f"{name} must be a real number") from exc
    if not math.isfinite(x):
        raise InvalidParameter(f"{name} must be finite, got {x!r}")
    return x


def _integer(name, x):
    if isinstance(x, bool) or float(x) != int(float(x)):
        raise InvalidParameter(f"{name} must be an integer, got {x!r}")
    return int(float(x))


def _apply_perturbations(family, dim, params, u, p, d):
    """Deliberate defects used as negative controls (kept in the JSON)."""
    if "pressure_scale" in params:
        s = _finite("pressure_scale", params["pressure_scale"])
        p0 = p
        p = lambda X: p0(X) * s  # noqa: E731
    if "velocity_shift" in params:
        v = np.asarray(params["velocity_shift"], dtype=float)
        if v.shape != (dim,) or not np.all(np.isfinite(v)):
            raise InvalidParameter(f"velocity_shift must have {dim} finite entries")
        u0 = u
        u = lambda X: u0(X) + v  # noqa: E731
    if "director_shift" in params:
        w = np.asarray(params["director_shift"], dtype=float)
        if w.shape != (dim,) or not np.all(np.isfinite(w)):
            raise InvalidParameter(f"director_shift must have {dim} finite entries")
        d0 = d
        d = lambda X: _normalize(d0(X) + w)  # noqa: E731
    return u, p, d


def _extras(kwargs):
    bad = set(kwargs) - set(PERTURBATION_KEYS)
    if bad:
        raise InvalidParameter(f"unknown parameters {sorted(bad)}")
    return dict(kwargs)


# ---------------------------------------------------------------------------
# constructors

def make_case_i(c, m, theta0, **extra) -> SolutionSpec:
    """u = c x/|x|^2, d winding (m+1) times, p = -(c^2 + (m+1)^2)/(2|x|^2)."""
    c, m, theta0 = _finite("c", c), _integer("m", m), _finite("theta0", theta0)
    extra = _extras(extra)
    form = extra.get("pressure_form", "exact")
    if form not in ("exact", "printed"):
        raise InvalidParameter("pressure_form must be 'exact' or 'printed'")
    w2 = (m + 1) ** 2
    pc = -(c * c + w2) / 2 if form == "exact" else (w2 - c * c) / 2

    def u(X):
        return _radial_over_r2(X, c)

    def p(X):
        return _r2(X).reciprocal() * pc

    def d(X):
        return _winding_director(X, m, theta0)

    params = {"c": c, "m": m, "theta0": theta0, **extra}
    u, p, d = _apply_perturbations("case_i", 2, extra, u, p, d)
    return SolutionSpec("case_i", 2, params, u, p, d)


def _profile_fields(profile, C1, m, theta1, theta2):
    def f_of(X):
        th = jets.atan2(X[1], X[0]) + theta1
        return th.apply(*profile.evaluate_all(th.value))

    def u(X):
        return _radial_over_r2(X, f_of(X))

    def p(X):
        return (f_of(X) * 2.0 + C1) * _r2(X).reciprocal()


    def d(X):
        return _winding_director(X, m, theta2)

    return u, p, d


def make_case_ii(Phi, k, m, theta1, theta2, *, profile: ProfileSolution | None = None,
                 C1: float | None = None, config: ShootingConfig = ShootingConfig(),
                 **extra) -> SolutionSpec:
    """u = f(theta + theta1) x/|x|^2, p = (2 f + C1)/|x|^2, winding director.

    ``C1`` defaults to the value obtained by integrating the profile
    equation numerically over one turn.
    """
    Phi = _finite("Phi", Phi)
    k, m = _integer("k", k), _integer("m", m)
    theta1, theta2 = _finite("theta1", theta1), _finite("theta2", theta2)
    if k < 1:
        raise InvalidParameter("k must be a positive integer")
    extra = _extras(extra)
    if profile is None:
        profile = solve_profile(Phi, k, config)
    if C1 is None:
        C1 = compute_C1(profile, m)[1]
    u, p, d = _profile_fields(profile, C1, m, theta1, theta2)
    params = {"Phi": Phi, "k": k, "m": m, "theta1": theta1, "theta2": theta2, **extra}
    u, p, d = _apply_perturbations("case_ii", 2, extra, u, p, d)
    return SolutionSpec("case_ii", 2, params, u, p, d, profile=profile, C1=float(C1))


def make_custom_profile(profile: ProfileSolution, C1, m, theta1=0.0, theta2=0.0,
                        **extra) -> SolutionSpec:
    """Profile-backed 2D field from user-supplied Fourier data (no solve)."""
    m = _integer("m", m)
    theta1, theta2 = _finite("theta1", theta1), _finite("theta2", theta2)
    C1 = _finite("C1", C1)
    extra = _extras(extra)
    u, p, d = _profile_fields(profile, C1, m, theta1, theta2)
    params = {"m": m, "theta1": theta1, "theta2": theta2, **extra}
    u, p, d = _apply_perturbations("custom_profile", 2, extra, u, p, d)
    return SolutionSpec("custom_profile", 2, params, u, p, d, profile=profile, C1=C1)


def make_case_iii(Psi, mu, theta3, **extra) -> SolutionSpec:
    """u = (Psi/2pi) x/|x|^2 + mu x_perp/|x|^2, p = -|u|^2/2, constant director."""
    Psi, mu, theta3 = _finite("Psi", Psi), _finite("mu", mu), _finite("theta3", theta3)
    if mu == 0:
        raise InvalidParameter("mu must be nonzero (mu = 0 is covered by case_i/case_ii)")
    extra = _extras(extra)
    a = Psi / (2 * math.pi)
    pc = -(a * a + mu * mu) / 2

    def u(X):
        perp = Jet.stack([-X[1], X[0]])
        return (X * a + perp * mu) * _r2(X).reciprocal().expand()

    def p(X):
        return _r2(X).reciprocal() * pc

    def d(X):
        return X.constant_like(np.array([math.cos(theta3), math.sin(theta3)]))

    params = {"Psi": Psi, "mu": mu, "theta3": theta3, **extra}
    u, p, d = _apply_perturbations("case_iii", 2, extra, u, p, d)
    return SolutionSpec("case_iii", 2, params, u, p, d)


def landau_velocity(a):
    """Jet field of the Landau velocity for parameter a > 1 (Cartesian closed form).

    u = 2 [ (a x3 - r) x / (r (a r - x3)^2) + e3 / (a r - x3) ],
    the curl of (2 sin(phi)/(a - cos(phi))) e_theta / r.
    """
    e3 = np.array([0.0, 0.0, 1.0])

    def u(X):
        r = jets.norm(X)
        x3 = X[2]
        den = r * a - x3
        inv = den.reciprocal()
        coef = (x3 * a - r) * (r * den * den).reciprocal()
        return (X * coef.expand() + inv.expand() * e3) * 2.0

    return u


@lru_cache(maxsize=32)
def _landau_pressure_table(a, degree=None):
    """Chebyshev series P(t), t = x3/|x|, with p = P(t)/|x|^2 recovered from u."""
    from .residual import pressure_gradient, pressure_recovery

    u = landau_velocity(a)

    def d(X):
        return X.constant_like(np.array([0.0, 0.0, 1.0]))

    base = np.array([0.0, 0.0, 1.0])
    # degree -2 homogeneity: x . grad p = -2 p fixes the additive constant
    g0 = pressure_gradient(u, d, base[None, :])[0]
    p0 = -0.5 * float(base @ g0)
    cheb = np.polynomial.chebyshev
    prev = None
    for deg in (degree,) if degree else (48, 96, 192, 384):
        t = np.cos(math.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
        pts = np.stack([np.sqrt(1 - t * t), np.zeros_like(t), t], axis=-1)
        vals, _ = pressure_recovery(u, d, base, pts, base_value=p0, certify=False)
        coef = cheb.chebfit(t, vals, deg)
        scale = np.abs(coef).max()
        prev = coef
        if degree or np.abs(coef[-max(4, deg // 8):]).max() < 1e-14 * scale:
            break
    prev.setflags(write=False)
    return prev


@lru_cache(maxsize=32)
def _landau_certificate(a):
    from .residual import curl_certificate

    def d(X):
        return X.constant_like(np.array([0.0, 0.0, 1.0]))

    return curl_certificate(landau_velocity(a), d, 3)


def make_landau(a) -> SolutionSpec:
    """Landau jet with constant director (0, 0, 1); ``a = inf`` gives u = 0."""
    if isinstance(a, str):
        a = a.strip().lower()
        if a in ("inf", "+inf", "infinity"):
            a = math.inf
    try:
        a = float(a)
    except (TypeError, ValueError) as exc:
        raise InvalidParameter(f"a must be a real number > 1 or 'inf', got {a!r}") from exc
    if math.isnan(a) or a <= 1:
        raise InvalidParameter(f"Landau parameter must satisfy a > 1, got {a!r}")

    def d(X):
        return X.constant_like(np.array([0.0, 0.0, 1.0]))

    if math.isinf(a):
        return SolutionSpec("landau", 3, {"a": math.inf}, _zero_vector, _zero_scalar, d,
                            certificate=0.0)
    u = landau_velocity(a)
    coef = _landau_pressure_table(a)
    dcoef = np.polynomial.chebyshev.chebder(coef)
    ddcoef = np.polynomial.chebyshev.chebder(dcoef)
    cv = np.polynomial.chebyshev.chebval

    def p(X):
        r2 = _r2(X)
        t = X[2] * r2.sqrt().reciprocal()
        tv = t.value
        if t.order == 0:
            return Jet(cv(tv, coef)) * r2.reciprocal()
        P = t.apply(cv(tv, coef), cv(tv, dcoef), None if t.order < 2 else cv(tv, ddcoef))
        return P * r2.reciprocal()

    return SolutionSpec("landau", 3, {"a": a}, u, p, d, certificate=_landau_certificate(a))


def make_hedgehog(n, **extra) -> SolutionSpec:
    """u = 0, p = -(n-1)/(2|x|^2), d = x/|x|."""
    n = _integer("n", n)
    if n < 2:
        raise InvalidParameter("hedgehog needs n >= 2")
    extra = _extras(extra)
    pc = -(n - 1) / 2

    def p(X):
        return _r2(X).reciprocal() * pc

    def d(X):
        return _normalize(X)

    params = {"n": n, **extra}
    u, p, d = _apply_perturbations("hedgehog", n, extra, _zero_vector, p, d)
    return SolutionSpec("hedgehog", n, params, u, p, d)


def make_constant_director(n, d0, **extra) -> SolutionSpec:
    """The rigid state u = 0, p = 0, d = d0."""
    n = _integer("n", n)
    if n < 2:
        raise InvalidParameter("need n >= 2")
    d0 = np.asarray(d0, dtype=float)
    if d0.shape != (n,) or not np.all(np.isfinite(d0)):
        raise InvalidParameter(f"d0 must have {n} finite components")
    if abs(np.linalg.norm(d0) - 1) > 1e-12:
        raise NonUnitDirector(f"|d0| = {np.linalg.norm(d0)!r}, expected 1")
    extra = _extras(extra)

    def d(X):
        return X.constant_like(d0)

    params = {"n": n, "d0": [float(x) for x in d0], **extra}
    u, p, d = _apply_perturbations("constant_director", n, extra, _zero_vector, _zero_scalar, d)
    return SolutionSpec("constant_director", n, params, u, p, d)


# ---------------------------------------------------------------------------
# serialization

_REQUIRED = {
    "case_i": ("c", "m", "theta0"),
    "case_ii": ("Phi", "k", "m", "theta1", "theta2"),
    "case_iii": ("Psi", "mu", "theta3"),
    "landau": ("a",),
    "hedgehog": (),
    "constant_director": ("d0",),
    "custom_profile": ("m",),
}
_DIMS = {"case_i": 2, "case_ii": 2, "case_iii": 2, "landau": 3, "custom_profile": 2}


def from_dict(doc: dict[str, Any]) -> SolutionSpec:
    """Rebuild a spec from its JSON document (inverse of ``to_dict``)."""
    if not isinstance(doc, dict):
        raise ValidationError("spec document must be a JSON object")
    family = doc.get("family")
    if family not in FAMILIES:
        raise ValidationError(f"unknown family {family!r}")
    try:
        dim = _integer("dim", doc.get("dim"))
    except (TypeError, InvalidParameter) as exc:
        raise ValidationError("dim must be an integer") from exc
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ValidationError("params must be an object")
    missing = [k for k in _REQUIRED[family] if k not in params]
    if missing:
        raise ValidationError(f"{family} params missing {missing}")
    if family in _DIMS and dim != _DIMS[family]:
        raise ValidationError(f"{family} requires dim={_DIMS[family]}, got {dim}")
    has_profile = doc.get("profile") is not None
    if has_profile != (family in ("case_ii", "custom_profile")):
        raise ValidationError("profile must be present exactly for case_ii and custom_profile")
    extra = {k: v for k, v in params.items() if k in PERTURBATION_KEYS}
    known = set(_REQUIRED[family]) | set(PERTURBATION_KEYS) | {"n", "theta1", "theta2"}
    unknown = set(params) - known
    if unknown:
        raise ValidationError(f"unknown params {sorted(unknown)}")
    try:
        if family == "case_i":
            return make_case_i(params["c"], params["m"], params["theta0"], **extra)
        if family == "case_iii":
            return make_case_iii(params["Psi"], params["mu"], params["theta3"], **extra)
        if family == "landau":
            if extra:
                raise ValidationError("landau does not accept perturbation params")
            return make_landau(params["a"])
        if family == "hedgehog":
            if params.get("n", dim) != dim:
                raise ValidationError("hedgehog params.n must equal dim")
            return make_hedgehog(dim, **extra)
        if family == "constant_director":
            return make_constant_director(dim, params["d0"], **extra)
        if family == "case_ii":
            prof = ProfileSolution.from_dict(doc["profile"])
            C1 = doc["profile"].get("C1")
            return make_case_ii(params["Phi"], params["k"], params["m"], params["theta1"],
                                params["theta2"], profile=prof, C1=C1, **extra)
        prof = ProfileSolution.from_dict(doc["profile"])
        return make_custom_profile(prof, doc["profile"]["C1"], params["m"],
                                   params.get("theta1", 0.0), params.get("theta2", 0.0),
                                   **extra)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed spec: {exc}") from exc


# ---------------------------------------------------------------------------
# classification of sampled 2D profiles

def sample_profiles(spec: SolutionSpec, M=256):
    """Sample (f, v, q, xi) on the unit circle at theta_j = 2 pi j / M."""
    if spec.dim != 2:
        raise ValidationError("profiles are defined for 2D specs")
    th = 2 * math.pi * np.arange(M) / M
    pts = np.stack([np.cos(th), np.sin(th)], axis=-1)
    u, p, d = spec.values(pts)
    er, et = pts, np.stack([-pts[:, 1], pts[:, 0]], axis=-1)
    f = np.sum(u * er, axis=-1)
    v = np.sum(u * et, axis=-1)
    xi = np.arctan2(d[:, 1], d[:, 0]) - th
    return f, v, p, xi


def _spectral_diff(y, order=1):
    M = y.size
    j = np.fft.rfftfreq(M, 1.0 / M)
    c = np.fft.rfft(y) * (1j * j) ** order
    if M % 2 == 0:
        c[-1] = 0
    return np.fft.irfft(c, M)


def _winding(xi):
    M = xi.size
    un = np.unwrap(xi)
    slope = (un[-1] - un[0]) / (2 * math.pi * (M - 1) / M)
    return int(round(slope)), un


def reduced_system_residual(f, v, q, xi):
    """Sup residual of the reduced ODE system for samples on [0, 2 pi).

    Equations (primes are theta-derivatives, w = xi' + 1):
      -f'' + v f' - f^2 - v^2 - 2q - w^2 = 0,   q' - 2f' + (w^2)' = 0,
      v' = 0,   xi'' - v w = 0.
    """
    f, v, q, xi = (np.asarray(a, dtype=float) for a in (f, v, q, xi))
    M = f.size
    th = 2 * math.pi * np.arange(M) / M
    m, un = _winding(xi)
    per = un - m * th
    xp = m + _spectral_diff(per)
    xpp = _spectral_diff(per, 2)
    w = xp + 1
    fp, fpp = _spectral_diff(f), _spectral_diff(f, 2)
    r1 = -fpp + v * fp - f * f - v * v - 2 * q - w * w
    r2 = _spectral_diff(q) - 2 * fp + _spectral_diff(w * w)
    r3 = _spectral_diff(v)
    r4 = xpp - v * w
    scale = max(1.0, np.abs(f).max() ** 2, np.abs(v).max() ** 2, np.abs(q).max(),
                np.abs(w).max() ** 2)
    return max(np.abs(r).max() for r in (r1, r2, r3, r4)) / scale


def classify_profile(f, v, q, xi, tol=1e-6):
    """Identify the family and parameters of sampled 2D profiles.

    Returns ``(family, params)``.  Raises :class:`Unclassifiable` when the
    samples violate the reduced system or match no branch.
    """
    f, v, q, xi = (np.asarray(a, dtype=float) for a in (f, v, q, xi))
    res = reduced_system_residual(f, v, q, xi)
    if not res < tol:
        raise Unclassifiable(f"samples violate the reduced system (relative residual {res:.2e})")
    M = f.size
    th = 2 * math.pi * np.arange(M) / M
    m, un = _winding(xi)
    scale = max(np.abs(f).max(), np.abs(v).max(), 1e-300)

    def const(y):
        return np.abs(y - y.mean()).max() <= tol * max(np.abs(y).max(), scale, 1.0)

    if np.abs(v).max() <= tol * max(scale, 1.0):
        phase = float(np.mod((un - m * th).mean(), 2 * math.pi))
        if const(f):
            return "case_i", {"c": float(f.mean()), "m": m, "theta0": phase}
        c = np.fft.rfft(f) / M
        amp = np.abs(c[1:])
        sig = np.nonzero(amp > 1e-8 * amp.max())[0] + 1
        k = int(np.gcd.reduce(sig))
        theta1 = float(np.mod(np.angle(c[k]) / k, 2 * math.pi / k))
        return "case_ii", {"Phi": float(2 * math.pi * f.mean()), "k": k, "m": m,
                           "theta1": theta1, "theta2": phase}
    if not (const(f) and const(v)):
        raise Unclassifiable("v is nonzero but f or v is not constant")
    if m != -1 or not const(un + th):
        raise Unclassifiable("v is nonzero but xi' + 1 does not vanish")
    theta3 = float(np.mod((un + th).mean(), 2 * math.pi))
    return "case_iii", {"Psi": float(2 * math.pi * f.mean()), "mu": float(v.mean()),
                        "theta3": theta3}
