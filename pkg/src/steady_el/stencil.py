"""Central finite-difference stencils with radius-relative steps.

Stencil points are formed and the field is sampled in ``np.longdouble``;
the integer stencil weights are applied exactly and divided once at the
end.  On x86-64 this gives roughly three extra decimal digits over a plain
float64 evaluation, which is what brings 4th-order second derivatives of
the strongly peaked fields below 1e-6 at the default step.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import StencilHitsOrigin, ValidationError
from .jets import Jet

MODES = ("analytic-preferred", "forced-fd")


@dataclass(frozen=True)
class StencilConfig:
    order: int = 4
    relative_step: float = 1e-4
    mode: str = "analytic-preferred"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.order not in (2, 4):
            raise ValidationError(f"stencil order must be 2 or 4, got {self.order}")
        if not 0.0 < self.relative_step < 0.1:
            raise ValidationError(f"relative step must lie in (0, 0.1), got {self.relative_step}")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def use_fd(self):
        return self.mode == "forced-fd"


_FIRST = {2: ({1: 1, -1: -1}, 2), 4: ({1: 8, -1: -8, 2: -1, -2: 1}, 12)}
_SECOND = {2: ({1: 1, 0: -2, -1: 1}, 1), 4: ({2: -1, 1: 16, 0: -30, -1: 16, -2: -1}, 12)}
_MIXED = {
    2: ({(1, 1): 1, (-1, -1): 1, (1, -1): -1, (-1, 1): -1}, 4),
    4: ({(1, -2): 8, (2, -1): 8, (-2, 1): 8, (-1, 2): 8,
         (-1, -2): -8, (-2, -1): -8, (1, 2): -8, (2, 1): -8,
         (2, -2): -1, (-2, 2): -1, (-2, -2): 1, (2, 2): 1,
         (-1, -1): 64, (1, 1): 64, (1, -1): -64, (-1, 1): -64}, 144),
}


@lru_cache(maxsize=None)
def _tables(n, order, hessian):
    """Offsets (K, n) and integer weights for gradient and Hessian."""
    offsets = {(0,) * n: 0}

    def slot(off):
        return offsets.setdefault(off, len(offsets))

    cf, den_g = _FIRST[order]
    grad_w = []
    for i in range(n):
        row = {}
        for s, c in cf.items():
            off = [0] * n
            off[i] = s
            row[slot(tuple(off))] = c
        grad_w.append(row)
    hess_w, den_h = None, None
    if hessian:
        cs, den_s = _SECOND[order]
        cm, den_m = _MIXED[order]
        den_h = den_s * den_m
        hess_w = [[None] * n for _ in range(n)]
        for i in range(n):
            row = {}
            for s, c in cs.items():
                off = [0] * n
                off[i] = s
                row[slot(tuple(off))] = c * den_m
            hess_w[i][i] = row
            for j in range(i + 1, n):
                row = {}
                for (a, b), c in cm.items():
                    off = [0] * n
                    off[i], off[j] = a, b
                    row[slot(tuple(off))] = c * den_s
                hess_w[i][j] = hess_w[j][i] = row
    K = len(offsets)
    off_arr = np.zeros((K, n))
    for off, k in offsets.items():
        off_arr[k] = off
    G = np.zeros((n, K), dtype=np.longdouble)
    for i, row in enumerate(grad_w):
        for k, c in row.items():
            G[i, k] = c
    H = None
    if hessian:
        H = np.zeros((n, n, K), dtype=np.longdouble)
        for i in range(n):
            for j in range(n):
                for k, c in hess_w[i][j].items():
                    H[i, j, k] = c
    return off_arr, G, den_g, H, den_h


def _steps(points, config):
    r = np.linalg.norm(points, axis=-1)
    h = config.relative_step * r
    bad = (r == 0) | (config.order * h >= r)
    if np.any(bad):
        raise StencilHitsOrigin(f"stencil reaches the origin at {points[np.argmax(bad)].tolist()}")
    return h


def stencil_jet(field, points, config: StencilConfig, hessian=True) -> Jet:
    """Finite-difference jet of ``field`` at ``points``.

    ``field`` maps an ``(M, n)`` array of points to an ``(M, ...)`` array.
    """
    points = np.asarray(points, dtype=float)
    N, n = points.shape
    h = _steps(points, config).astype(np.longdouble)
    off, G, den_g, H, den_h = _tables(n, config.order, hessian)
    K = off.shape[0]
    xs = (points.astype(np.longdouble)[:, None, :]
          + h[:, None, None] * off.astype(np.longdouble)[None, :, :])
    vals = np.asarray(field(xs.reshape(N * K, n)))
    vals = vals.astype(np.longdouble).reshape((N, K) + vals.shape[1:])
    extra = vals.ndim - 2
    hv = h.reshape((N,) + (1,) * extra)
    # grad[..., i] = sum_k G[i, k] * vals[:, k, ...]
    grad = np.tensordot(vals, G, axes=([1], [1]))
    grad = grad / (den_g * hv)[..., None]
    hess = None
    if hessian:
        hess = np.tensordot(vals, H, axes=([1], [2])) / (den_h * hv * hv)[..., None, None]
        hess = hess.astype(float)
    return Jet(vals[:, 0].astype(float), grad.astype(float), hess)


def fd_derivative(field, points, config: StencilConfig = StencilConfig(), op="gradient"):
    """Finite-difference derivative of ``field`` at ``points``.

    ``op`` is one of ``gradient`` (Jacobian for vector values, trailing axis
    is the derivative direction), ``hessian``, ``laplacian`` or
    ``divergence`` (vector fields with as many components as dimensions).
    """
    if op == "gradient":
        return stencil_jet(field, points, config, hessian=False).grad
    if op == "divergence":
        J = stencil_jet(field, points, config, hessian=False).grad
        return np.trace(J, axis1=-2, axis2=-1)
    if op == "hessian":
        return stencil_jet(field, points, config).hess
    if op == "laplacian":
        return np.trace(stencil_jet(field, points, config).hess, axis1=-2, axis2=-1)
    raise ValidationError(f"unknown derivative op {op!r}")
