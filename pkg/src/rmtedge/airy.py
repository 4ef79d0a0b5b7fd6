"""Airy function, Airy kernel and the 2x2 edge kernel of the orthogonal ensemble.

Conventions
-----------
Q(x, y) = (Ai(x) Ai'(y) - Ai'(x) Ai(y)) / (x - y), so Q(x, x) = Ai'(x)^2 - x Ai(x)^2 > 0.
tail(x) = int_x^inf Ai.

Matrix kernel entries::

    S(x, y) = Q(x, y) + Ai(x) (1 - tail(y)) / 2
    D(x, y) = -d/dy Q(x, y) - Ai(x) Ai(y) / 2
    I(x, y) = -int_x^inf Q(z, y) dz + (int_y^x Ai + tail(x) tail(y)) / 2

and the (2, 1) block of the operator is I(x, y) - eps(x - y) with eps = sign / 2.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import special

from .quadrature import gauss_legendre

X_RANGE = (-40.0, 40.0)
_NEAR_DIAGONAL = 1e-4
_PANEL_NODES = 24
_DECAY_NODES = 80
_TABLE_DEGREE = 24
_TABLE_NEG = -41.0
_TABLE_POS = 48.0


@dataclass(frozen=True)
class AiryEval:
    x: float
    ai: float
    ai_prime: float
    tail: float


def _check_range(x):
    x = np.asarray(x, dtype=float)
    if np.any((x < X_RANGE[0]) | (x > X_RANGE[1])) or np.any(~np.isfinite(x)):
        raise ValueError(f"Airy argument outside supported range {X_RANGE}")
    return x


def ai(x):
    return special.airy(np.asarray(x, dtype=float))[0]


def ai_prime(x):
    return special.airy(np.asarray(x, dtype=float))[1]


@lru_cache(maxsize=1)
def _negative_panels():
    # cum[k] = int_{-k}^0 Ai over unit panels, k = 0..40
    t, w = gauss_legendre(_PANEL_NODES, 0.0, 1.0)
    left = -np.arange(1, 41, dtype=float)
    pieces = (ai(left[:, None] + t[None, :]) * w).sum(axis=1)
    return np.concatenate([[0.0], np.cumsum(pieces)])


def _tail_quadrature(x):
    """int_x^inf Ai by Gauss-Legendre: unit panels on the oscillatory side, and for
    x >= 0 an interval long enough for Ai to fall by exp(-40)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    flat, res = x.reshape(-1), out.reshape(-1)
    t, w = gauss_legendre(_PANEL_NODES, 0.0, 1.0)
    pos = flat >= 0
    if np.any(pos):
        xp = flat[pos]
        upper = (xp ** 1.5 + 60.0) ** (2.0 / 3.0)
        tt, ww = gauss_legendre(_DECAY_NODES, 0.0, 1.0)
        span = (upper - xp)[:, None]
        res[pos] = (ai(xp[:, None] + span * tt) * ww).sum(axis=1) * span[:, 0]
    neg = ~pos
    if np.any(neg):
        xn = flat[neg]
        k = np.minimum(np.floor(-xn).astype(int), 40)
        start = -k.astype(float)  # partial panel [x, -k]
        span = (start - xn)[:, None]
        partial = (ai(xn[:, None] + span * t) * w).sum(axis=1) * span[:, 0]
        res[neg] = 1.0 / 3.0 + _negative_panels()[k] + partial
    return out


@lru_cache(maxsize=1)
def _tail_tables():
    # piecewise Chebyshev interpolants on unit panels: tail itself for x < 0,
    # tail / Ai for x >= 0 so that relative accuracy survives the decay
    u = np.cos(np.pi * (np.arange(_TABLE_DEGREE + 1) + 0.5) / (_TABLE_DEGREE + 1))
    neg_left = np.arange(_TABLE_NEG, 0.0)
    pos_left = np.arange(0.0, _TABLE_POS)
    pts_neg = neg_left[:, None] + 0.5 * (u + 1.0)
    pts_pos = pos_left[:, None] + 0.5 * (u + 1.0)
    vneg = _tail_quadrature(pts_neg)
    vpos = _tail_quadrature(pts_pos) / ai(pts_pos)
    fit = lambda v: C.chebfit(u, v.T, _TABLE_DEGREE).T  # noqa: E731
    return fit(vneg), fit(vpos)


def _panel_eval(coef, left0, x):
    idx = np.clip(np.floor(x - left0).astype(int), 0, coef.shape[0] - 1)
    u = 2.0 * (x - (left0 + idx)) - 1.0
    c = coef[idx]
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for k in range(c.shape[1] - 1, 0, -1):
        b1, b2 = 2.0 * u * b1 - b2 + c[:, k], b1
    return u * b1 - b2 + c[:, 0]


def ai_tail(x):
    """int_x^inf Ai(z) dz.

    scipy's itairy is only good to about 1e-4 near x = 6; the values here come from
    Gauss-Legendre quadrature of Ai, tabulated once as piecewise Chebyshev interpolants.
    """
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    out = np.empty(flat.shape)
    neg = (flat < 0) & (flat >= _TABLE_NEG)
    pos = (flat >= 0) & (flat < _TABLE_POS)
    other = ~(neg | pos)
    cneg, cpos = _tail_tables()
    if np.any(neg):
        out[neg] = _panel_eval(cneg, _TABLE_NEG, flat[neg])
    if np.any(pos):
        out[pos] = _panel_eval(cpos, 0.0, flat[pos]) * ai(flat[pos])
    if np.any(other):
        out[other] = _tail_quadrature(flat[other])
    out = out.reshape(x.shape)
    return out if x.ndim else float(out)


def airy_eval(x) -> AiryEval:
    x = float(_check_range(x))
    a, ap, _, _ = special.airy(x)
    return AiryEval(x=x, ai=float(a), ai_prime=float(ap), tail=float(ai_tail(x)))


def _taylor_coefficients(x, a, ap):
    # Q(x, x + h) = q0 + q1 h + q2 h^2 + q3 h^3 + O(h^4), from Ai'' = x Ai
    q0 = ap * ap - x * a * a
    q1 = -0.5 * a * a
    q2 = -(a * ap + x * x * a * a - x * ap * ap) / 6.0
    q3 = -(2.0 * x * a * a - ap * ap) / 12.0
    return q0, q1, q2, q3


def q_airy(x, y):
    """Airy kernel Q(x, y), broadcasting over x and y."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    ax, apx, _, _ = special.airy(x)
    ay, apy, _, _ = special.airy(y)
    h = y - x
    near = np.abs(h) <= _NEAR_DIAGONAL
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (ax * apy - apx * ay) / (x - y)
    if np.any(near):
        # expand about the smaller argument so that Q(x, y) == Q(y, x) exactly
        swap = h < 0
        base = np.where(swap, y, x)
        a, ap = np.where(swap, ay, ax), np.where(swap, apy, apx)
        d = np.abs(h)
        q0, q1, q2, q3 = _taylor_coefficients(base, a, ap)
        out = np.where(near, q0 + d * (q1 + d * (q2 + d * q3)), out)
    return out


def dq_airy_dy(x, y):
    """Closed form of d/dy Q(x, y) using the Airy equation."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    ax, apx, _, _ = special.airy(x)
    ay, apy, _, _ = special.airy(y)
    h = y - x
    near = np.abs(h) <= _NEAR_DIAGONAL
    with np.errstate(divide="ignore", invalid="ignore"):
        q = (ax * apy - apx * ay) / (x - y)
        out = (ax * y * ay - apx * apy + q) / (x - y)
    if np.any(near):
        _, q1, q2, q3 = _taylor_coefficients(x, ax, apx)
        out = np.where(near, q1 + h * (2.0 * q2 + 3.0 * h * q3), out)
    return out


def q_airy_tail(x, y, nodes=240):
    """Matrix of int_{x_i}^inf Q(z, y_j) dz for 1-d arrays x and y.

    Uses Q(x, y) = int_0^inf Ai(x+t) Ai(y+t) dt, hence
    int_x^inf Q(z, y) dz = int_0^inf tail(x+t) Ai(y+t) dt; one Gauss-Legendre
    rule in t, cut where both factors are below double precision, serves the whole grid.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    lo = min(x.min(), y.min())
    T = max(12.0 - lo, 1.0)
    # split at the point where every argument is non-negative: oscillatory part and decaying part
    t_split = min(max(-lo, 0.0), T)
    ts, ws = [], []
    if t_split > 0:
        t, w = gauss_legendre(nodes, 0.0, t_split)
        ts.append(t)
        ws.append(w)
    t, w = gauss_legendre(max(nodes // 2, 60), t_split, T)
    ts.append(t)
    ws.append(w)
    t = np.concatenate(ts)
    w = np.concatenate(ws)
    tail_x = ai_tail(x[:, None] + t[None, :])
    ai_y = ai(y[:, None] + t[None, :])
    return (tail_x * w) @ ai_y.T


class MatrixAiry(NamedTuple):
    S: np.ndarray
    D: np.ndarray
    I: np.ndarray
    eps: np.ndarray

    @property
    def ST(self):
        """The (2, 2) entry S(y, x)."""
        return self.S.T


def matrix_airy(x, y=None, nodes=240) -> MatrixAiry:
    """Entries of the limiting 2x2 kernel on the grid x[:, None], y[None, :].

    The (2, 2) entry is S(y, x); on a square grid x == y it is `S.T`. The eps
    term is returned separately so the caller assembles I - eps.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = x if y is None else np.atleast_1d(np.asarray(y, dtype=float))
    _check_range(x)
    _check_range(y)
    X, Y = x[:, None], y[None, :]
    ax = ai(x)[:, None]
    ay = ai(y)[None, :]
    tx = ai_tail(x)[:, None]
    ty = ai_tail(y)[None, :]
    Q = q_airy(X, Y)
    S = Q + 0.5 * ax * (1.0 - ty)
    D = -dq_airy_dy(X, Y) - 0.5 * ax * ay
    # int_y^x Ai = tail(y) - tail(x); this orientation is the one the finite-n kernels converge to
    I = -q_airy_tail(x, y, nodes) + 0.5 * ((ty - tx) + tx * ty)
    eps = 0.5 * np.sign(X - Y)
    return MatrixAiry(S=S, D=D, I=I, eps=eps)
