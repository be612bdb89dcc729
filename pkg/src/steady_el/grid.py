"""Frames, annulus grids and sphere quadrature rules."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePole, InvalidGrid, UnsupportedDimension


def sphere_area(n):
    """Surface measure of the unit sphere in R^n."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def polar_basis(theta):
    """Return ``(e_r, e_theta)`` at polar angle ``theta``."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([c, s]), np.array([-s, c])


def spherical_basis(phi, theta):
    """Return ``(e_r, e_phi, e_theta)``; ``phi`` is the polar angle from the x3 axis."""
    if not 0.0 < phi < math.pi or abs(math.sin(phi)) < 1e-12:
        raise DegeneratePole(f"azimuthal frame undefined at polar angle {phi!r}")
    sp, cp = math.sin(phi), math.cos(phi)
    st, ct = math.sin(theta), math.cos(theta)
    e_r = np.array([sp * ct, sp * st, cp])
    e_phi = np.array([cp * ct, cp * st, -sp])
    e_theta = np.array([-st, ct, 0.0])
    return e_r, e_phi, e_theta


DEFAULT_ANGULAR = {2: (64,), 3: (16, 32), 4: (8, 8, 16)}


@dataclass(frozen=True)
class GridSpec:
    """Annulus sampling: geometric radii times uniform angular nodes.

    ``angular_resolution`` lists node counts per angle.  For n=3 these are
    (polar, azimuthal); for n=4 (psi, polar, azimuthal).  ``None`` selects
    the default for the dimension.
    """

    r_min: float = 0.5
    r_max: float = 2.0
    n_radial: int = 9
    angular_resolution: tuple | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not (math.isfinite(self.r_min) and math.isfinite(self.r_max)):
            raise InvalidGrid("radii must be finite")
        if self.r_min <= 0 or self.r_min >= self.r_max:
            raise InvalidGrid(f"need 0 < r_min < r_max, got {self.r_min}, {self.r_max}")
        if int(self.n_radial) != self.n_radial or self.n_radial < 2:
            raise InvalidGrid("n_radial must be an integer >= 2")
        if self.angular_resolution is not None:
            if any(int(a) != a or a < 1 for a in self.angular_resolution):
                raise InvalidGrid("angular resolutions must be positive integers")

    def angles(self, n):
        res = self.angular_resolution or DEFAULT_ANGULAR.get(n)
        if res is None:
            raise UnsupportedDimension(f"no default angular resolution for n={n}")
        if len(res) != n - 1:
            raise InvalidGrid(f"n={n} needs {n - 1} angular resolutions, got {len(res)}")
        return tuple(int(a) for a in res)

    def radii(self):
        i = np.arange(self.n_radial)
        return self.r_min * (self.r_max / self.r_min) ** (i / (self.n_radial - 1))

    def refined(self, n):
        """Grid with doubled radial and angular resolution."""
        return GridSpec(self.r_min, self.r_max, 2 * self.n_radial,
                        tuple(2 * a for a in self.angles(n)))

    def to_dict(self, n):
        return {"r_min": self.r_min, "r_max": self.r_max, "n_radial": self.n_radial,
                "angular_resolution": list(self.angles(n))}


def sphere_points(n, resolution):
    """Unit-sphere nodes for an angular resolution tuple (poles excluded)."""
    if n == 2:
        (nt,) = resolution
        t = 2 * math.pi * np.arange(nt) / nt
        return np.stack([np.cos(t), np.sin(t)], axis=-1)
    if n == 3:
        nphi, nt = resolution
        phi = math.pi * (np.arange(nphi) + 0.5) / nphi
        t = 2 * math.pi * np.arange(nt) / nt
        P, T = np.meshgrid(phi, t, indexing="ij")
        pts = np.stack([np.sin(P) * np.cos(T), np.sin(P) * np.sin(T), np.cos(P)], axis=-1)
        return pts.reshape(-1, 3)
    if n == 4:
        npsi, nphi, nt = resolution
        psi = math.pi * (np.arange(npsi) + 0.5) / npsi
        phi = math.pi * (np.arange(nphi) + 0.5) / nphi
        t = 2 * math.pi * np.arange(nt) / nt
        S, P, T = np.meshgrid(psi, phi, t, indexing="ij")
        pts = np.stack([np.cos(S), np.sin(S) * np.cos(P),
                        np.sin(S) * np.sin(P) * np.cos(T),
                        np.sin(S) * np.sin(P) * np.sin(T)], axis=-1)
        return pts.reshape(-1, 4)
    raise UnsupportedDimension(f"grids are implemented for n in {{2,3,4}}, got {n}")


def annulus_grid(spec: GridSpec, n: int) -> np.ndarray:
    """Points of the annulus grid, radius-major, shape ``(n_radial * M, n)``."""
    spec.validate()
    omega = sphere_points(n, spec.angles(n))
    r = spec.radii()
    return (r[:, None, None] * omega[None, :, :]).reshape(-1, n)


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def dim(self):
        return self.nodes.shape[1]

    def integrate(self, values, radius=1.0):
        """Integrate samples taken at ``radius * nodes`` over the sphere of that radius."""
        values = np.asarray(values)
        w = self.weights.reshape((-1,) + (1,) * (values.ndim - 1))
        return np.sum(w * values, axis=0) * radius ** (self.dim - 1)


def sphere_quadrature(n: int, resolution: int = 16) -> Quadrature:
    """Product quadrature on the unit sphere S^{n-1}.

    n=2 uses ``4*resolution`` trapezoid nodes; n=3 uses Gauss-Legendre in
    cos(phi) times ``2*resolution`` azimuthal trapezoid nodes; n=4 adds a
    Gauss-Legendre rule in psi carrying the sin^2(psi) weight.
    """
    if resolution < 1:
        raise InvalidGrid("quadrature resolution must be >= 1")
    if n == 2:
        m = 4 * resolution
        t = 2 * math.pi * np.arange(m) / m
        return Quadrature(np.stack([np.cos(t), np.sin(t)], axis=-1), np.full(m, 2 * math.pi / m))
    if n not in (3, 4):
        raise UnsupportedDimension(f"sphere quadrature is implemented for n in {{2,3,4}}, got {n}")
    nt = 2 * resolution
    t = 2 * math.pi * np.arange(nt) / nt
    wt = np.full(nt, 2 * math.pi / nt)
    z, wz = np.polynomial.legendre.leggauss(resolution)
    if n == 3:
        Z, T = np.meshgrid(z, t, indexing="ij")
        S = np.sqrt(1 - Z * Z)
        nodes = np.stack([S * np.cos(T), S * np.sin(T), Z], axis=-1).reshape(-1, 3)
        weights = np.outer(wz, wt).ravel()
        return Quadrature(nodes, weights)
    x, wx = np.polynomial.legendre.leggauss(resolution)
    psi = 0.5 * math.pi * (x + 1)
    wpsi = 0.5 * math.pi * wx * np.sin(psi) ** 2
    Ps, Z, T = np.meshgrid(psi, z, t, indexing="ij")
    S = np.sqrt(1 - Z * Z)
    nodes = np.stack([np.cos(Ps), np.sin(Ps) * Z, np.sin(Ps) * S * np.cos(T),
                      np.sin(Ps) * S * np.sin(T)], axis=-1).reshape(-1, 4)
    weights = (wpsi[:, None, None] * wz[None, :, None] * wt[None, None, :]).ravel()
    return Quadrature(nodes, weights)
