"""Second-order jets: values carried together with gradients and Hessians.

A :class:`Jet` stores ``value`` with shape ``S``, ``grad`` with shape
``S + (n,)`` and ``hess`` with shape ``S + (n, n)``, where ``n`` is the
number of independent Cartesian variables.  Arithmetic propagates the
derivatives exactly (forward-mode differentiation truncated at order two),
so closed-form fields written once give analytic first and second
derivatives.  An order-0 jet (``grad is None``) carries values only and is
what the finite-difference stencils feed through the same field code.
"""

from __future__ import annotations

import numpy as np


def _v(a, k):
    # append k trailing axes so value-shaped arrays broadcast against grad/hess
    return a[(...,) + (None,) * k]


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


class Jet:
    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad=None, hess=None):
        self.value = value
        self.grad = grad
        self.hess = hess

    # construction -------------------------------------------------------
    @classmethod
    def variable(cls, points, order=2):
        """Coordinate jet for an ``(N, n)`` array of points."""
        points = np.asarray(points)
        if order == 0:
            return cls(points)
        N, n = points.shape
        eye = np.broadcast_to(np.eye(n, dtype=points.dtype), (N, n, n))
        grad = np.array(eye)
        hess = np.zeros((N, n, n, n), dtype=points.dtype) if order >= 2 else None
        return cls(points, grad, hess)

    def constant_like(self, value):
        """Constant jet broadcast to this jet's leading shape."""
        value = np.asarray(value, dtype=self.value.dtype if np.issubdtype(
            self.value.dtype, np.floating) else float)
        lead = self.value.shape[:1]
        value = np.broadcast_to(value, lead + value.shape).copy()
        if self.grad is None:
            return Jet(value)
        n = self.grad.shape[-1]
        grad = np.zeros(value.shape + (n,), dtype=value.dtype)
        hess = None if self.hess is None else np.zeros(value.shape + (n, n), dtype=value.dtype)
        return Jet(value, grad, hess)

    @property
    def order(self):
        if self.grad is None:
            return 0
        return 1 if self.hess is None else 2

    @property
    def shape(self):
        return self.value.shape

    # structural ---------------------------------------------------------
    def __getitem__(self, idx):
        """Index the value axes after the leading point axis."""
        if not isinstance(idx, tuple):
            idx = (idx,)
        idx = (slice(None),) + idx
        g = None if self.grad is None else self.grad[idx]
        h = None if self.hess is None else self.hess[idx]
        return Jet(self.value[idx], g, h)

    def expand(self):
        """Add a trailing singleton value axis (for broadcasting)."""
        g = None if self.grad is None else self.grad[..., None, :]
        h = None if self.hess is None else self.hess[..., None, :, :]
        return Jet(self.value[..., None], g, h)

    def sum(self):
        """Sum over the last value axis."""
        g = None if self.grad is None else self.grad.sum(axis=-2)
        h = None if self.hess is None else self.hess.sum(axis=-3)
        return Jet(self.value.sum(axis=-1), g, h)

    @staticmethod
    def stack(jets):
        """Stack scalar jets along a new trailing value axis."""
        value = np.stack([j.value for j in jets], axis=-1)
        if jets[0].grad is None:
            return Jet(value)
        grad = np.stack([j.grad for j in jets], axis=-2)
        hess = None if jets[0].hess is None else np.stack([j.hess for j in jets], axis=-3)
        return Jet(value, grad, hess)

    # arithmetic ---------------------------------------------------------
    def __neg__(self):
        g = None if self.grad is None else -self.grad
        h = None if self.hess is None else -self.hess
        return Jet(-self.value, g, h)

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.value + other, self.grad, self.hess)
        value = self.value + other.value
        if self.grad is None:
            return Jet(value)
        g = self.grad + other.grad
        h = None if self.hess is None else self.hess + other.hess
        return Jet(value, g, h)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = np.asarray(other)
            g = None if self.grad is None else self.grad * _v(c, 1)
            h = None if self.hess is None else self.hess * _v(c, 2)
            return Jet(self.value * c, g, h)
        a, b = self, other
        value = a.value * b.value
        if a.grad is None:
            return Jet(value)
        g = _v(a.value, 1) * b.grad + _v(b.value, 1) * a.grad
        h = None
        if a.hess is not None:
            h = (_v(a.value, 2) * b.hess + _v(b.value, 2) * a.hess
                 + _outer(a.grad, b.grad) + _outer(b.grad, a.grad))
        return Jet(value, g, h)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        v = self.value
        return self.apply(v ** p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    # elementary functions -----------------------------------------------
    def apply(self, f0, f1, f2):
        """Compose with a univariate function given its value and derivatives."""
        if self.grad is None:
            return Jet(f0)
        g = _v(f1, 1) * self.grad
        h = None
        if self.hess is not None:
            h = _v(f1, 2) * self.hess + _v(f2, 2) * _outer(self.grad, self.grad)
        return Jet(f0, g, h)

    def reciprocal(self):
        r = 1.0 / self.value
        return self.apply(r, -r * r, 2.0 * r * r * r)

    def sqrt(self):
        s = np.sqrt(self.value)
        return self.apply(s, 0.5 / s, -0.25 / (s * self.value))

    def sin(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return self.apply(s, c, -s)

    def cos(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return self.apply(c, -s, -c)

    def exp(self):
        e = np.exp(self.value)
        return self.apply(e, e, e)

    def log(self):
        r = 1.0 / self.value
        return self.apply(np.log(self.value), r, -r * r)


def norm(x):
    """Euclidean norm over the last value axis of a vector jet."""
    return (x * x).sum().sqrt()


def dot(a, b):
    return (a * b).sum()


def atan2(y, x):
    """Jet of ``arctan2(y, x)`` for scalar jets ``y`` and ``x``."""
    value = np.arctan2(y.value, x.value)
    if y.grad is None:
        return Jet(value)
    s = x.value * x.value + y.value * y.value
    num = _v(x.value, 1) * y.grad - _v(y.value, 1) * x.grad
    grad = num / _v(s, 1)
    hess = None
    if y.hess is not None:
        dnum = (_outer(y.grad, x.grad) - _outer(x.grad, y.grad)
                + _v(x.value, 2) * y.hess - _v(y.value, 2) * x.hess)
        ds = 2.0 * (_v(x.value, 1) * x.grad + _v(y.value, 1) * y.grad)
        hess = dnum / _v(s, 2) - _outer(num, ds) / _v(s * s, 2)
    return Jet(value, grad, hess)
