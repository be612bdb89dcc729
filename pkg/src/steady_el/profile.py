"""Periodic profiles of the reduced radial-flow ODE.

The profile f solves ``f'' + f^2 + 4f = lam`` with a prescribed minimal
period ``2*pi/k`` and mean ``Phi/(2*pi)``.  With ``g = f + 2`` and
``E = lam + 4`` this becomes the conservative oscillator ``g'' = E - g^2``
with Hamiltonian ``H = g'^2/2 + g^3/3 - E*g``.  Its phase portrait has a
center at ``g = +sqrt(E)`` and a saddle at ``g = -sqrt(E)``; closed orbits
fill the band whose turning points lie in ``(-sqrt(E), 2*sqrt(E))``.

Orbits are integrated with a sixth-order symmetric composition of the
velocity-Verlet map (a symplectic Runge-Kutta-Nystrom scheme).  Because
orbits are reversible about their turning points only a half period is
integrated.  Orbits are parametrised by their minimum, which stays well
conditioned as the orbit approaches the separatrix.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (NewtonDivergence, NoExistence, NonPeriodicOrbit, SolverError,
                     StepTooCoarse, ValidationError)

try:
    import numba
    njit = numba.njit
except Exception:  # pragma: no cover
    def njit(*args, **kwargs):
        def deco(f):
            return f
        return deco


TWO_PI = 2 * math.pi

# Yoshida's sixth-order triple-jump coefficients (solution A)
_W1 = -1.17767998417887
_W2 = 0.235573213359357
_W3 = 0.784513610477560
_W0 = 1.0 - 2.0 * (_W1 + _W2 + _W3)


@dataclass(frozen=True)
class ShootingConfig:
    rk_step: float = 1e-4 * TWO_PI
    newton_tol: float = 1e-12
    max_newton: int = 50
    fourier_N: int = 64

    def __post_init__(self):
        if not (self.rk_step > 0 and self.newton_tol > 0):
            raise ValidationError("rk_step and newton_tol must be positive")
        if self.max_newton < 1 or self.fourier_N < 4:
            raise ValidationError("max_newton >= 1 and fourier_N >= 4 required")


# ---------------------------------------------------------------------------
# numba kernels

@njit(cache=True, nogil=True)
def _step(g, p, E, h):
    ws = (_W3, _W2, _W1, _W0, _W1, _W2, _W3)
    for w in ws:
        hw = h * w
        p += 0.5 * hw * (E - g * g)
        g += hw * p
        p += 0.5 * hw * (E - g * g)
    return g, p


@njit(cache=True, nogil=True)
def _half_orbit(E, g0, h, max_steps):
    """Integrate from the turning point g0 to the next one.

    Returns (t_half, integral of g, max |dH|, g_end, n_steps, status);
    status 0 = ok, 1 = no turning point within max_steps.
    """
    g, p = g0, 0.0
    H0 = g0 ** 3 / 3.0 - E * g0
    s0 = 1.0 if E - g0 * g0 > 0 else -1.0
    drift = 0.0
    acc = 0.0
    for n in range(max_steps):
        gn, pn = _step(g, p, E, h)
        H = 0.5 * pn * pn + gn ** 3 / 3.0 - E * gn
        dH = abs(H - H0)
        if dH > drift:
            drift = dH
        if pn * s0 <= 0.0:
            # turning point inside (t_n, t_n + h]: Newton on the sub-step
            gdd = E - g * g
            tau = -p / gdd if gdd != 0.0 else 0.5 * h
            if tau <= 0.0 or tau > h:
                tau = 0.5 * h
            for _ in range(8):
                gt, pt = _step(g, p, E, tau)
                d = pt / (E - gt * gt)
                tau -= d
                if abs(d) < 1e-17 * (1.0 + tau):
                    break
            gt, pt = _step(g, p, E, tau)
            # composite trapezoid on [0, n h] with Euler-Maclaurin end
            # corrections; g' = p and g''' = -2 g p both vanish at the start
            acc = h * (acc + 0.5 * (g - g0)) - h * h / 12.0 * p \
                + h ** 4 / 720.0 * (-2.0 * g * p)
            acc += tau * 0.5 * (g + gt) - tau * tau / 12.0 * (pt - p) \
                + tau ** 4 / 720.0 * (-2.0 * gt * pt + 2.0 * g * p)
            return n * h + tau, acc, drift, gt, n + 1, 0
        acc += g
        g, p = gn, pn
    return 0.0, 0.0, drift, g, max_steps, 1


@njit(cache=True, nogil=True)
def _sample_half(E, g0, t_half, m):
    g = np.empty(m + 1)
    p = np.empty(m + 1)
    g[0], p[0] = g0, 0.0
    h = t_half / m
    gg, pp = g0, 0.0
    for i in range(m):
        gg, pp = _step(gg, pp, E, h)
        g[i + 1] = gg
        p[i + 1] = pp
    return g, p


# ---------------------------------------------------------------------------
# orbits

def other_turning_point(E, g0):
    """Second turning point of the closed orbit through the turning point g0."""
    return 0.5 * (-g0 + math.sqrt(max(12.0 * E - 3.0 * g0 * g0, 0.0)))


@dataclass(frozen=True)
class Orbit:
    E: float
    g_min: float
    g_max: float
    period: float
    mean: float
    drift: float
    t: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)

    @property
    def amplitude(self):
        return 0.5 * (self.g_max - self.g_min)


def _scale(E):
    return (2.0 / 3.0) * E ** 1.5


def _check_band(E, g0):
    if not (E > 0 and math.isfinite(E) and math.isfinite(g0)):
        raise NonPeriodicOrbit(f"need finite E > 0, got E={E!r}")
    s = math.sqrt(E)
    if not (-s < g0 < 2 * s):
        raise NonPeriodicOrbit(
            f"turning point {g0!r} outside the closed-orbit band (-sqrt(E), 2 sqrt(E))"
            f" = ({-s:.6g}, {2 * s:.6g})")


def _half(E, g0, h):
    """Half-orbit integration with error mapping; returns (t_half, integral, g_end)."""
    if not -math.sqrt(E) < g0 < 2 * math.sqrt(E):
        raise NonPeriodicOrbit(f"turning point {g0!r} outside the closed-orbit band")
    max_steps = int(50 * TWO_PI / ((4 * E) ** 0.25 * h)) + 1000
    t_half, acc, drift, g_end, n, status = _half_orbit(E, g0, h, max_steps)
    if status != 0:
        raise NonPeriodicOrbit(f"no return to a turning point for E={E!r}, g0={g0!r}")
    if drift > 1e-10 * _scale(E):
        raise StepTooCoarse(f"energy drift {drift / _scale(E):.2e} (relative) exceeds 1e-10")
    return t_half, acc, g_end, drift


def integrate_orbit(E, g0, config: ShootingConfig = ShootingConfig()) -> Orbit:
    """Period, mean and one period of samples of the orbit through turning point g0."""
    E, g0 = float(E), float(g0)
    _check_band(E, g0)
    s = math.sqrt(E)
    if g0 == s:
        T = TWO_PI / (4.0 * E) ** 0.25
        t = np.array([0.0, T])
        return Orbit(E, s, s, T, s, 0.0, t, np.full(2, s), np.zeros(2))
    h = config.rk_step / max(1.0, E ** 0.25)
    t_half, acc, g_end, drift = _half(E, g0, h)
    lo, hi = min(g0, g_end), max(g0, g_end)
    m = max(16, int(math.ceil(t_half / h)))
    g, p = _sample_half(E, g0, t_half, m)
    t = np.linspace(0.0, t_half, m + 1)
    t_full = np.concatenate([t, 2 * t_half - t[-2::-1]])
    g_full = np.concatenate([g, g[-2::-1]])
    p_full = np.concatenate([p, -p[-2::-1]])
    return Orbit(E, lo, hi, 2 * t_half, acc / t_half, drift, t_full, g_full, p_full)


def elliptic_period_mean(E, g_max):
    """Closed-form period and mean of the orbit with maximum ``g_max``.

    Uses g = e1 - (e1 - e2) sn^2(kappa t | m); independent of any integrator.
    """
    from scipy.special import ellipe, ellipk

    s = math.sqrt(12 * E - 3 * g_max ** 2)
    e1, e2, e3 = g_max, (-g_max + s) / 2, (-g_max - s) / 2
    m = (e1 - e2) / (e1 - e3)
    kappa = math.sqrt((e1 - e3) / 6)
    K, Ec = ellipk(m), ellipe(m)
    return 2 * K / kappa, e1 - (e1 - e3) * (1 - Ec / K)


# ---------------------------------------------------------------------------
# existence and the profile solve

def existence_condition(Phi, k, rel_tol=1e-12):
    """True iff 4 + Phi/pi <= k^2.  Ties within ``rel_tol`` count as equality."""
    if int(k) != k or k < 1:
        raise ValidationError(f"k must be a positive integer, got {k!r}")
    return _boundary_gap(Phi, k, rel_tol) >= 0


def _boundary_gap(Phi, k, rel_tol=1e-12):
    """k^2 - 4 - Phi/pi, snapped to 0 when within rounding of the boundary."""
    gap = k * k - 4 - Phi / math.pi
    if abs(gap) <= rel_tol * max(1.0, abs(Phi / math.pi), k * k):
        return 0.0
    return gap


@dataclass(frozen=True)
class ProfileSolution:
    """A periodic profile stored as a real Fourier series on [0, 2*pi).

    ``fourier_cos[j]``/``fourier_sin[j]`` multiply cos(j*theta)/sin(j*theta);
    only multiples of ``k`` are nonzero.  ``lam`` is the ODE constant in
    f'' + f^2 + 4f = lam.
    """

    fourier_cos: np.ndarray
    fourier_sin: np.ndarray
    lam: float
    Phi: float
    k: int
    amplitude: float
    residual_sup: float
    E: float
    g_min: float
    period: float
    mean: float
    degenerate: bool = False
    method: str = "newton"
    tail_energy: float = 0.0

    @property
    def C1_ode(self):
        return compute_C1(self, 0)[0]

    @property
    def C1_printed_formula(self):
        return compute_C1(self, 0)[2]

    def evaluate(self, theta, deriv=0):
        """Profile (or its derivative of order ``deriv``) at angles ``theta``."""
        theta = np.asarray(theta)
        j = np.nonzero((self.fourier_cos != 0) | (self.fourier_sin != 0))[0]
        if j.size == 0:
            return np.zeros_like(theta)
        a, b = self.fourier_cos[j], self.fourier_sin[j]
        arg = theta[..., None] * j.astype(theta.dtype if theta.dtype.kind == "f" else float)
        c, s = np.cos(arg), np.sin(arg)
        jf = j.astype(float)
        if deriv == 0:
            return (c * a).sum(-1) + (s * b).sum(-1)
        if deriv == 1:
            return (jf * (s * -a + c * b)).sum(-1)
        if deriv == 2:
            return (-jf * jf * (c * a + s * b)).sum(-1)
        raise ValidationError("deriv must be 0, 1 or 2")

    def evaluate_all(self, theta):
        """(f, f', f'') at ``theta`` by the angle-addition recurrence over harmonics k j."""
        theta = np.asarray(theta)
        k = self.k
        a, b = self.fourier_cos[::k], self.fourier_sin[::k]
        ck, sk = np.cos(k * theta), np.sin(k * theta)
        c, s = np.ones_like(ck), np.zeros_like(sk)
        f = np.full_like(ck, a[0])
        f1, f2 = np.zeros_like(ck), np.zeros_like(ck)
        for i in range(1, a.size):
            c, s = c * ck - s * sk, s * ck + c * sk
            if a[i] == 0 and b[i] == 0:
                continue
            j = float(k * i)
            even = a[i] * c + b[i] * s
            f += even
            f1 += j * (b[i] * c - a[i] * s)
            f2 -= j * j * even
        return f, f1, f2

    def to_dict(self, C1):
        return {"fourier_cos": [float(x) for x in self.fourier_cos],
                "fourier_sin": [float(x) for x in self.fourier_sin],
                "lambda": float(self.lam), "C1": float(C1), "k": int(self.k),
                "Phi": float(self.Phi)}

    @classmethod
    def from_dict(cls, d):
        a = np.asarray(d["fourier_cos"], dtype=float)
        b = np.asarray(d["fourier_sin"], dtype=float)
        if a.shape != b.shape or a.ndim != 1 or a.size < 1:
            raise ValidationError("fourier_cos and fourier_sin must be equal-length lists")
        lam, k, Phi = float(d["lambda"]), int(d["k"]), float(d["Phi"])
        prof = cls(a, b, lam, Phi, k, 0.0, 0.0, lam + 4, 0.0, TWO_PI / k, Phi / TWO_PI,
                   method="loaded")
        th = np.linspace(0, TWO_PI, 8 * a.size, endpoint=False)
        f = prof.evaluate(th)
        res = np.abs(prof.evaluate(th, 2) + f * f + 4 * f - lam).max()
        object.__setattr__(prof, "residual_sup", float(res))
        object.__setattr__(prof, "amplitude", float(0.5 * (f.max() - f.min())))
        return prof


def compute_C1(profile: ProfileSolution, m: int):
    """Return (C1_ode, C1_integral_direct, C1_printed) for winding m.

    The pressure profile is q = 2f + C1.  Substituting into the radial
    momentum balance gives f'' + f^2 + 4f = -2*C1 - (m+1)^2, so
    C1_ode = -(lam + (m+1)^2)/2.  ``C1_integral_direct`` integrates
    -f'' - f^2 - 4f numerically over one turn and solves the same balance
    for C1.  ``C1_printed`` is the literature expression
    -(1/4pi) int f^2 - 2 Phi/pi + (m+1)^2/2, reported for comparison only.
    """
    w = (m + 1) ** 2
    C1_ode = -(profile.lam + w) / 2
    M = 8 * max(profile.fourier_cos.size, 8)
    th = np.linspace(0.0, TWO_PI, M, endpoint=False)
    f = profile.evaluate(th)
    f2 = profile.evaluate(th, 2)
    integral = np.sum(-f2 - f * f - 4 * f) * TWO_PI / M
    C1_direct = (integral / TWO_PI - w) / 2
    int_f2 = np.sum(f * f) * TWO_PI / M
    C1_printed = -int_f2 / (4 * math.pi) - 2 * profile.Phi / math.pi + w / 2
    return C1_ode, C1_direct, C1_printed


def _sigma(s):
    return 1.0 / (1.0 + math.exp(-s)) if s > -700 else 0.0


def _unpack(u):
    E = math.exp(u[0])
    rt = math.sqrt(E)
    g_min = rt * (2.0 * _sigma(u[1]) - 1.0)
    return E, g_min


def _pack(E, g_min):
    rt = math.sqrt(E)
    sig = min(max((g_min / rt + 1.0) / 2.0, 1e-300), 1 - 2.0 ** -52)
    return np.array([math.log(E), math.log(sig) - math.log1p(-sig)])


def _period_mean(E, g_min, h):
    t_half, acc, g_end, _ = _half(E, g_min, h / max(1.0, E ** 0.25))
    return 2 * t_half, acc / t_half, g_end


def _residual(u, T_target, M_target, h):
    E, g_min = _unpack(u)
    T, M, _ = _period_mean(E, g_min, h)
    return np.array([T - T_target, M - M_target])


def _newton(u, T_target, M_target, config):
    """Damped Newton in (ln E, logit) coordinates; returns (u, max|F|).

    Close to the separatrix the period is sensitive to rounding at the
    1e-10 level, so when the iteration stagnates above ``newton_tol`` the
    iterate is still accepted if the period is met to 1e-9 and the mean to
    1e-10.
    """
    h = config.rk_step
    F = _residual(u, T_target, M_target, h)
    stall = 0
    for _ in range(config.max_newton):
        res = np.abs(F).max()
        if res <= config.newton_tol:
            return u, res
        J = np.empty((2, 2))
        for j in range(2):
            du = 1e-6 * max(1.0, abs(u[j]))
            up, um = u.copy(), u.copy()
            up[j] += du
            um[j] -= du
            J[:, j] = (_residual(up, T_target, M_target, h)
                       - _residual(um, T_target, M_target, h)) / (2 * du)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise NewtonDivergence("singular Jacobian") from exc
        if not np.all(np.isfinite(step)):
            raise NewtonDivergence("non-finite Newton step")
        lam, trial, Ft = 1.0, None, None
        while lam > 1e-4:
            try:
                Ft = _residual(u + lam * step, T_target, M_target, h)
                trial = u + lam * step
                if np.abs(Ft).max() < res:
                    break
            except (NonPeriodicOrbit, StepTooCoarse):
                Ft = None
            lam *= 0.5
        if Ft is None:
            raise NewtonDivergence("line search left the closed-orbit band")
        stall = stall + 1 if np.abs(Ft).max() >= 0.5 * res else 0
        u, F = trial, Ft
        if stall >= 4 or np.abs(lam * step).max() < 1e-14 * max(1.0, np.abs(u).max()):
            break
    if abs(F[0]) < 1e-9 and abs(F[1]) < 1e-10:
        return u, np.abs(F).max()
    raise NewtonDivergence(f"Newton did not converge: residual {np.abs(F).max():.3e}")


def _lindstedt_guess(T_target, M_target):
    """Small-amplitude guess from second-order Lindstedt-Poincare theory.

    With g = s0 + A cos(wt) + O(A^2): w = sqrt(2 s0) - 5A^2/(12 (2 s0)^1.5)
    and mean = s0 - A^2/(4 s0).  Eliminating A gives a quadratic in
    sqrt(2 s0).
    """
    k = TWO_PI / T_target
    disc = max(k * k - 35.0 * M_target / 18.0, 0.0)
    w = (k + math.sqrt(disc)) * 6.0 / 7.0
    s0 = 0.5 * w * w
    A = math.sqrt(4 * s0 * max(s0 - M_target, 0.0))
    g_min = s0 - A - A * A / (6 * s0)
    g_min = max(min(g_min, s0 * (1 - 1e-6)), -s0 * (1 - 1e-9))
    return _pack(s0 * s0, g_min)


def _continue(q_start_guess, q_target, k, config, q_prev=None):
    """Natural-parameter continuation in q = Phi/pi towards q_target.

    ``q_start_guess`` is a list of (q, u) pairs already solved (may be empty).
    Returns the converged u at q_target.
    """
    T_target = TWO_PI / k
    qb = k * k - 4
    path = list(q_start_guess)
    if not path:
        q0 = max(q_target, qb - 0.01 * k * k)
        u0 = _lindstedt_guess(T_target, 2 + q0 / 2)
        u0, _ = _newton(u0, T_target, 2 + q0 / 2, config)
        path.append((q0, u0))
    step = 0.25 * k * k
    while path[-1][0] > q_target:
        q_cur, u_cur = path[-1]
        q_next = max(q_target, q_cur - step)
        if len(path) >= 2:
            (qa, ua), (qc, uc) = path[-2], path[-1]
            guess = uc + (uc - ua) * (q_next - qc) / (qc - qa)
        else:
            guess = u_cur.copy()
        try:
            u_next, _ = _newton(guess, T_target, 2 + q_next / 2, config)
        except (NewtonDivergence, NonPeriodicOrbit, StepTooCoarse):
            step *= 0.5
            if step < 1e-4:
                raise NewtonDivergence(f"continuation stalled at Phi/pi={q_cur:.6g}")
            continue
        path.append((q_next, u_next))
        step = min(step * 1.5, max(1.0, 0.5 * k * k))
    return path


def bisection_oracle(Phi, k, config: ShootingConfig = ShootingConfig()):
    """Nested bisection: inner on the orbit minimum (period), outer on E (mean).

    Returns (E, g_min).  Slow but derivative-free; used as the fallback and
    as the independent check of the Newton path.
    """
    if _boundary_gap(Phi, k) <= 0:
        raise NoExistence(_no_existence_msg(Phi, k))
    T_target = TWO_PI / k
    M_target = 2 + Phi / TWO_PI
    h = config.rk_step

    def inner(E):
        lo, hi = -30.0, 30.0   # logit of the normalised minimum
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            T, _, _ = _period_mean(*_unpack((math.log(E), mid)), h)
            if T > T_target:
                lo = mid   # too wide an orbit: move the minimum up
            else:
                hi = mid
            if hi - lo < 1e-13 * max(1.0, abs(mid)):
                break
        return 0.5 * (lo + hi)

    def mean_at(E):
        s = inner(E)
        _, M, _ = _period_mean(*_unpack((math.log(E), s)), h)
        return M, s

    lnE_lo = math.log(k ** 4 / 4)
    lnE_hi = lnE_lo + 0.5
    while mean_at(math.exp(lnE_hi))[0] > M_target:
        lnE_hi += 0.5
    for _ in range(200):
        mid = 0.5 * (lnE_lo + lnE_hi)
        if mean_at(math.exp(mid))[0] > M_target:
            lnE_lo = mid
        else:
            lnE_hi = mid
        if lnE_hi - lnE_lo < 1e-15 * max(1.0, abs(mid)):
            break
    lnE = 0.5 * (lnE_lo + lnE_hi)
    _, s = mean_at(math.exp(lnE))
    return _unpack((lnE, s))


def _no_existence_msg(Phi, k):
    return (f"no nontrivial periodic profile: the condition 4 + Phi/pi <= k^2 fails "
            f"for Phi={Phi!r}, k={k} (4 + Phi/pi = {4 + Phi / math.pi:.12g} > {k * k})")


def _degenerate_profile(Phi, k, config):
    N = config.fourier_N
    c = Phi / TWO_PI
    a = np.zeros(k * N + 1)
    a[0] = c
    E = (c + 2) ** 2
    return ProfileSolution(a, np.zeros_like(a), E - 4, float(Phi), k, 0.0, 0.0, E,
                           c + 2, TWO_PI / k, c, degenerate=True, method="constant")


def _build_profile(E, g_min, Phi, k, config, method):
    """Resample the converged orbit and convert it to a certified Fourier series."""
    N = config.fourier_N
    h = config.rk_step / max(1.0, E ** 0.25)
    t_half, acc, g_max, _ = _half(E, g_min, h)
    mean = acc / t_half
    half = 2 * N                                  # 4N samples per period
    sub = max(1, int(math.ceil(t_half / (half * h))))
    m = half * sub
    # re-seat the end on a turning point of the sampling integrator itself so
    # the mirrored half orbits join without a kink in the derivative
    for _ in range(3):
        g, p = _sample_half(E, g_min, t_half, m)
        t_half -= p[-1] / (E - g[-1] * g[-1])
    g, p = _sample_half(E, g_min, t_half, m)
    T = 2 * t_half
    g = g[::sub]
    full = np.concatenate([g, g[-2:0:-1]])        # min -> max -> min, 4N samples
    full = np.roll(full, -half)                   # start at the maximum
    f = full - 2.0
    c = np.fft.rfft(f) / f.size
    a = np.zeros(k * N + 1)
    b = np.zeros(k * N + 1)
    a[0] = c[0].real
    a[k::k] = 2 * c[1:N + 1].real
    b[k::k] = -2 * c[1:N + 1].imag
    energy = np.abs(c[1:N + 1]) ** 2
    tail = energy[3 * N // 4:].sum() / max(energy.sum(), 1e-300)
    if tail > 1e-10:
        raise SolverError(f"Fourier tail carries {tail:.2e} of the energy (> 1e-10)")
    lam = E - 4
    prof = ProfileSolution(a, b, lam, float(Phi), k, 0.5 * (g_max - g_min), 0.0, E, g_min,
                           T, mean - 2.0, method=method, tail_energy=float(tail))
    th = np.linspace(0.0, TWO_PI, 8 * (k * N + 1), endpoint=False)
    fv = prof.evaluate(th)
    res = float(np.abs(prof.evaluate(th, 2) + fv * fv + 4 * fv - lam).max())
    object.__setattr__(prof, "residual_sup", res)
    if res > 1e-8:
        raise SolverError(f"spectral residual {res:.2e} exceeds 1e-8")
    return prof


def solve_profile(Phi, k, config: ShootingConfig = ShootingConfig(), *, _path=None):
    """Periodic profile with minimal period 2*pi/k and integral Phi over one turn."""
    k = int(k)
    gap = _boundary_gap(Phi, k)
    if gap < 0:
        raise NoExistence(_no_existence_msg(Phi, k))
    if gap == 0:
        return _degenerate_profile(float(Phi), k, config)
    Phi = float(Phi)
    q = Phi / math.pi
    T_target = TWO_PI / k
    try:
        path = _continue(_path or [], q, k, config)
        E, g_min = _unpack(path[-1][1])
        method = "newton"
        if _path is not None:
            _path[:] = path[-2:]
    except (NewtonDivergence, NonPeriodicOrbit, StepTooCoarse):
        E, g_min = bisection_oracle(Phi, k, config)
        method = "bisection"
    prof = _build_profile(E, g_min, Phi, k, config, method)
    if abs(prof.period - T_target) > 1e-8 or abs(prof.mean - Phi / TWO_PI) > 1e-10:
        raise SolverError("period/mean constraints not met after convergence")
    return prof


# ---------------------------------------------------------------------------
# scans

SCAN_HEADER = "Phi,k,exists,solved,E,amplitude,residual_sup,C1_ode,C1_integral"


@dataclass(frozen=True)
class ScanRow:
    Phi: float
    k: int
    exists: bool
    solved: str          # "true", "false", "degenerate" or "failed"
    E: float = math.nan
    amplitude: float = math.nan
    residual_sup: float = math.nan
    C1_ode: float = math.nan
    C1_integral: float = math.nan
    error: str = ""

    def csv(self):
        def num(x):
            return "nan" if math.isnan(x) else repr(float(x))
        return ",".join([repr(float(self.Phi)), str(self.k), str(self.exists).lower(),
                         self.solved, num(self.E), num(self.amplitude),
                         num(self.residual_sup), num(self.C1_ode), num(self.C1_integral)])

    def to_dict(self):
        return {"Phi": self.Phi, "k": self.k, "exists": self.exists, "solved": self.solved,
                "E": self.E, "amplitude": self.amplitude, "residual_sup": self.residual_sup,
                "C1_ode": self.C1_ode, "C1_integral": self.C1_integral}


def phi_grid(phi_min, phi_max, phi_step):
    """Grid values as exact multiples of pi when the bounds are rational multiples."""
    for x in (phi_min, phi_max, phi_step):
        if not math.isfinite(float(x)):
            raise ValidationError("scan bounds must be finite")
    if float(phi_step) <= 0 or float(phi_min) > float(phi_max):
        raise ValidationError("need phi_step > 0 and phi_min <= phi_max")
    if all(isinstance(x, Fraction) for x in (phi_min, phi_max, phi_step)):
        n = int((phi_max - phi_min) / phi_step)
        return [phi_min + i * phi_step for i in range(n + 1)]
    lo, hi, st = float(phi_min), float(phi_max), float(phi_step)
    n = int(math.floor((hi - lo) / st * (1 + 1e-12)))
    return [lo + i * st for i in range(n + 1)]


def _scan_k(qs, k, config):
    """Rows for one k; qs are Phi/pi values (floats or Fractions)."""
    rows = {}
    inside = []
    for q in qs:
        Phi = float(q) * math.pi
        gap = (k * k - 4 - q) if isinstance(q, Fraction) else _boundary_gap(Phi, k)
        if gap < 0:
            rows[q] = ScanRow(Phi, k, False, "false")
        elif gap == 0:
            prof = _degenerate_profile(Phi, k, config)
            c1 = compute_C1(prof, 0)
            rows[q] = ScanRow(Phi, k, True, "degenerate", prof.E, 0.0, 0.0, c1[0], c1[1])
        else:
            inside.append(q)
    path = []
    for q in sorted(inside, key=float, reverse=True):
        Phi = float(q) * math.pi
        try:
            prof = solve_profile(Phi, k, config, _path=path)
            c1 = compute_C1(prof, 0)
            rows[q] = ScanRow(Phi, k, True, "true", prof.E, prof.amplitude,
                              prof.residual_sup, c1[0], c1[1])
        except SolverError as exc:
            path = []
            rows[q] = ScanRow(Phi, k, True, "failed", error=str(exc))
    return rows


def scan_existence(phi_min, phi_max, phi_step, k_max, config: ShootingConfig = ShootingConfig(),
                   threads=1):
    """Existence/solve table over a Phi grid and k = 1..k_max.

    Bounds given as :class:`fractions.Fraction` are read as multiples of pi
    so that boundary cells are classified exactly.  Rows are ordered by
    Phi, then k.
    """
    if int(k_max) != k_max or k_max < 1:
        raise ValidationError("k_max must be a positive integer")
    exact = all(isinstance(x, Fraction) for x in (phi_min, phi_max, phi_step))
    if exact:
        qs = phi_grid(phi_min, phi_max, phi_step)
    else:
        qs = [x / math.pi for x in phi_grid(phi_min, phi_max, phi_step)]
    ks = range(1, int(k_max) + 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            per_k = list(ex.map(lambda kk: _scan_k(qs, kk, config), ks))
    else:
        per_k = [_scan_k(qs, kk, config) for kk in ks]
    return [per_k[i][q] for q in qs for i in range(len(per_k))]
