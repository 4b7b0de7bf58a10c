"""Second-order univariate jets over complex scalars.

A :class:`Jet2` carries ``(v, d, dd)``: a value and its first and second
derivatives along one seeded direction. Fields may be Python scalars or
numpy arrays of matching shape, so a whole batch of points propagates in
one pass. The Laplacian is the sum of ``dd`` over one pass per coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Jet2:
    v: complex
    d: complex = 0.0
    dd: complex = 0.0

    @classmethod
    def const(cls, c) -> "Jet2":
        return cls(c, 0.0 * c, 0.0 * c)

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.v + other.v, self.d + other.d, self.dd + other.dd)
        return Jet2(self.v + other, self.d, self.dd)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.v, -self.d, -self.dd)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet2):
            return Jet2(
                self.v * other.v,
                self.d * other.v + self.v * other.d,
                self.dd * other.v + 2.0 * self.d * other.d + self.v * other.dd,
            )
        return Jet2(self.v * other, self.d * other, self.dd * other)

    __rmul__ = __mul__

    def scale(self, c) -> "Jet2":
        return Jet2(c * self.v, c * self.d, c * self.dd)

    def compose(self, f0, f1, f2) -> "Jet2":
        """Chain rule given f, f', f'' already evaluated at ``self.v``."""
        return Jet2(f0, f1 * self.d, f2 * self.d * self.d + f1 * self.dd)


def jet_seed(x, direction: int) -> tuple[Jet2, Jet2]:
    """Seed the two coordinates of a 2D point for differentiation along ``direction``."""
    if direction not in (0, 1):
        raise ValueError(f"direction must be 0 or 1, got {direction!r}")
    x0, x1 = x[0], x[1]
    one, zero = 1.0 + 0.0 * x0, 0.0 * x0
    if direction == 0:
        return Jet2(x0, one, zero), Jet2(x1, zero, zero)
    return Jet2(x0, zero, zero), Jet2(x1, one, zero)


# Activation derivative tables: (f, f', f'', f''') at z. The third
# derivative is only needed when reversing through a jet.


def tanh_derivs(z):
    t = np.tanh(z)
    s = 1.0 - t * t
    return t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0)


def sin_derivs(z):
    s, c = np.sin(z), np.cos(z)
    return s, c, -s, -c


def exp_i_derivs(z):
    # e^{iz} for complex z = a + bi is e^{-b}(cos a + i sin a)
    e = np.exp(1j * z)
    return e, 1j * e, -e, -1j * e


def tanh(j: Jet2) -> Jet2:
    f0, f1, f2, _ = tanh_derivs(j.v)
    return j.compose(f0, f1, f2)


def sin(j: Jet2) -> Jet2:
    f0, f1, f2, _ = sin_derivs(j.v)
    return j.compose(f0, f1, f2)


def exp_i(j: Jet2) -> Jet2:
    f0, f1, f2, _ = exp_i_derivs(j.v)
    return j.compose(f0, f1, f2)
