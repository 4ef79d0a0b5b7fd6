"""Quadrature rules and spectral integration helpers shared by the numerical modules."""

from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial import legendre as Leg
from scipy.fft import dct
from scipy.special import roots_legendre


@lru_cache(maxsize=64)
def _legendre_reference(n):
    x, w = roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n, a=-1.0, b=1.0):
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = _legendre_reference(int(n))
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def chebyshev_lobatto(n, a=-1.0, b=1.0):
    """Chebyshev extreme points on [a, b], ordered from a to b."""
    t = -np.cos(np.pi * np.arange(n) / (n - 1))
    return 0.5 * (b - a) * t + 0.5 * (a + b)


def chebyshev_coefficients(values):
    """Chebyshev coefficients of the interpolant through values at `chebyshev_lobatto` points.

    `values` has the points along axis 0; extra axes are transformed independently.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    # chebyshev_lobatto runs from -1 to +1, the DCT-I convention runs from +1 to -1
    c = dct(values[::-1], type=1, axis=0) / (n - 1)
    c[0] *= 0.5
    c[-1] *= 0.5
    return c


class ChebyshevAntiderivative:
    """Spectral antiderivative F(x) = int_a^x f for a bank of functions sampled on [a, b].

    Functions are sampled at `chebyshev_lobatto(n, a, b)`; `tail` is the largest
    magnitude among the last eight coefficients relative to the largest overall,
    a resolution diagnostic.
    """

    def __init__(self, values, a, b):
        self.a = float(a)
        self.b = float(b)
        coef = chebyshev_coefficients(values)
        scale = np.max(np.abs(coef)) if coef.size else 1.0
        self.tail = float(np.max(np.abs(coef[-8:])) / scale) if scale > 0 else 0.0
        self._coef = C.chebint(coef, lbnd=-1.0, scl=0.5 * (self.b - self.a), axis=0)

    def __call__(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.a, self.b)
        t = (2.0 * x - self.a - self.b) / (self.b - self.a)
        vander = C.chebvander(t, self._coef.shape[0] - 1)
        return vander @ self._coef

    def total(self):
        return self(np.array([self.b]))[0]


def cumulative_integration_matrix(nodes, a, b):
    """Matrix C with (C f)_i ~ int_a^{nodes_i} f for f sampled at Gauss-Legendre `nodes` on [a, b].

    Exact for polynomials of degree below len(nodes).
    """
    g = len(nodes)
    t = (2.0 * np.asarray(nodes) - a - b) / (b - a)
    _, w = _legendre_reference(g)
    vander = Leg.legvander(t, g - 1)
    # discrete Legendre transform: coefficients = diag((2k+1)/2) V^T diag(w) f
    forward = (vander * w[:, None]).T * ((2 * np.arange(g) + 1) / 2.0)[:, None]
    integ = Leg.legint(np.eye(g), lbnd=-1.0, scl=0.5 * (b - a), axis=0)
    return Leg.legvander(t, g) @ integ @ forward
