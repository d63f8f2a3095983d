"""Vectorized second-order forward-mode automatic differentiation.

A :class:`Jet` carries, for a batch of ``N`` evaluation points, the value
of a scalar expression together with its gradient and Hessian with
respect to ``m`` seed variables. Arithmetic propagates all three exactly
(truncated Taylor arithmetic), so the Hessian of any expression built
from ``+ - *``, division by plain arrays and :meth:`Jet.compose` is
exact to rounding.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Jet"]


class Jet:
    __slots__ = ("val", "grad", "hess")
    __array_ufunc__ = None  # ndarray (op) Jet defers to the reflected Jet method

    def __init__(self, val, grad, hess):
        self.val = val
        self.grad = grad
        self.hess = hess

    @classmethod
    def seed(cls, values, index: int, n_vars: int) -> "Jet":
        """Independent variable number ``index`` with point values ``values``."""
        values = np.asarray(values, dtype=float)
        grad = np.zeros(values.shape + (n_vars,))
        grad[..., index] = 1.0
        return cls(values, grad, np.zeros(values.shape + (n_vars, n_vars)))

    @classmethod
    def constant(cls, values, n_vars: int) -> "Jet":
        values = np.asarray(values, dtype=float)
        return cls(values, np.zeros(values.shape + (n_vars,)), np.zeros(values.shape + (n_vars, n_vars)))

    @property
    def n_vars(self) -> int:
        return self.grad.shape[-1]

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.val + other.val, self.grad + other.grad, self.hess + other.hess)
        return Jet(self.val + other, self.grad, self.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, -self.hess)

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet(self.val - other.val, self.grad - other.grad, self.hess - other.hess)
        return Jet(self.val - other, self.grad, self.hess)

    def __rsub__(self, other):
        return Jet(other - self.val, -self.grad, -self.hess)

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self, other
            ga, gb = a.grad, b.grad
            outer = ga[..., :, None] * gb[..., None, :]
            hess = a.val[..., None, None] * b.hess + b.val[..., None, None] * a.hess + outer + np.swapaxes(outer, -1, -2)
            return Jet(a.val * b.val, a.val[..., None] * gb + b.val[..., None] * ga, hess)
        c = np.asarray(other, dtype=float)
        return Jet(self.val * c, self.grad * c[..., None], self.hess * c[..., None, None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            raise TypeError("division by a Jet is not supported")
        return self * (1.0 / np.asarray(other, dtype=float))

    def square(self) -> "Jet":
        g = self.grad
        outer = g[..., :, None] * g[..., None, :]
        return Jet(self.val**2, 2.0 * self.val[..., None] * g, 2.0 * (self.val[..., None, None] * self.hess + outer))

    def compose(self, f, df, d2f) -> "Jet":
        """Apply a scalar function given its value and first two derivatives at ``self.val``."""
        g = self.grad
        outer = g[..., :, None] * g[..., None, :]
        return Jet(
            np.asarray(f, dtype=float),
            df[..., None] * g,
            df[..., None, None] * self.hess + d2f[..., None, None] * outer,
        )

    def __repr__(self):
        return f"Jet(shape={np.shape(self.val)}, n_vars={self.n_vars})"


def dot(a, b):
    """Sum of products of two equal-length sequences of Jets (or arrays)."""
    out = a[0] * b[0]
    for u, v in zip(a[1:], b[1:]):
        out = out + u * v
    return out
