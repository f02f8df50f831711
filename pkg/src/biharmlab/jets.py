"""Truncated Taylor arithmetic for exact derivatives up to a fixed order.

A :class:`Jet` stores Taylor coefficients ``c[k] = f^(k)(r0) / k!`` for
``k = 0..order``, vectorized over an array of expansion points.  Products,
quotients, ``exp`` and real powers propagate the coefficients exactly, so
any closed-form radial profile built from them has machine-precision
derivatives without symbolic work.
"""

from __future__ import annotations

import math

import numpy as np

ORDER = 4
_FACT = np.array([math.factorial(k) for k in range(ORDER + 1)], dtype=float)


class Jet:
    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @classmethod
    def variable(cls, r) -> "Jet":
        r = np.asarray(r, dtype=float)
        c = np.zeros((ORDER + 1,) + r.shape)
        c[0] = r
        c[1] = 1.0
        return cls(c)

    @classmethod
    def constant(cls, value, shape) -> "Jet":
        c = np.zeros((ORDER + 1,) + tuple(shape))
        c[0] = value
        return cls(c)

    @property
    def shape(self):
        return self.c.shape[1:]

    def derivatives(self) -> np.ndarray:
        """Array ``[f, f', f'', f''', f'''']`` stacked on axis 0."""
        return self.c * _FACT.reshape((-1,) + (1,) * (self.c.ndim - 1))

    # arithmetic ---------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.shape)

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.c + other.c)
        c = self.c.copy()
        c[0] = c[0] + other
        return Jet(c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * other)
        a, b = self.c, other.c
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        for k in range(ORDER + 1):
            for i in range(k + 1):
                out[k] += a[i] * b[k - i]
        return Jet(out)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        x = self.c
        y = np.zeros_like(x)
        y[0] = 1.0 / x[0]
        for k in range(1, ORDER + 1):
            acc = np.zeros_like(x[0])
            for j in range(1, k + 1):
                acc += x[j] * y[k - j]
            y[k] = -acc * y[0]
        return Jet(y)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def exp(self) -> "Jet":
        x = self.c
        y = np.zeros_like(x)
        y[0] = np.exp(x[0])
        for k in range(1, ORDER + 1):
            acc = np.zeros_like(x[0])
            for j in range(1, k + 1):
                acc += j * x[j] * y[k - j]
            y[k] = acc / k
        return Jet(y)

    def __pow__(self, a: float) -> "Jet":
        """Real power; requires a positive base (all our bases are ``r`` or ``1 + r^2``)."""
        x = self.c
        if float(a).is_integer() and a >= 0:
            out = Jet.constant(1.0, self.shape)
            for _ in range(int(a)):
                out = out * self
            return out
        y = np.zeros_like(x)
        y[0] = np.power(x[0], a)
        for k in range(1, ORDER + 1):
            acc = np.zeros_like(x[0])
            for j in range(1, k + 1):
                acc += (a * j - (k - j)) * x[j] * y[k - j]
            y[k] = acc / (k * x[0])
        return Jet(y)


def where(mask, a: Jet, b: Jet) -> Jet:
    return Jet(np.where(mask, a.c, b.c))


def smooth_step_h(s: Jet) -> Jet:
    """``exp(-1/s)`` for s > 0 and 0 otherwise.

    Below ``s = 1e-3`` the value and all four derivatives are under 1e-400
    in magnitude and are set to zero to avoid ``inf * 0``.
    """
    live = s.c[0] > 1e-3
    safe = Jet(np.where(live, s.c, 1.0))
    val = (-(safe.reciprocal())).exp()
    return Jet(np.where(live, val.c, 0.0))
