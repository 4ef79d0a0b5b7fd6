"""Nystrom evaluation of Fredholm determinants on (s, infinity), scalar and 2x2 block.

The half line is truncated to [s, s + span] (Airy-type kernels are below double
precision well before span = 16) and discretized by Gauss-Legendre. For the
2x2 orthogonal-ensemble kernel the eps(x - y) block is not a smooth kernel; it
is replaced by the spectral matrix of the operator f -> (int_s^x f - int_x^b f)/2,
so the block determinant converges at the same rate as the smooth blocks.

Weighting: the block matrix is conjugated by diag(sqrt(q w), sqrt(q / w)) with q
the quadrature weights and w(x) = x^2 + 1. This is a similarity, so the determinant
is that of the plain Nystrom matrix; it keeps the entries of both off-diagonal
blocks bounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .airy import ai, matrix_airy, q_airy
from .errors import ConvergenceError, PrecisionError
from .quadrature import cumulative_integration_matrix, gauss_legendre

DEFAULT_SPAN = 16.0
NEGATIVE_TOL = 1e-10


def weight(x):
    return x * x + 1.0


@dataclass(frozen=True)
class NystromOperator:
    """Discretized kernel: det(I - A) approximates the Fredholm determinant on (s, x_max)."""

    s: float
    x_max: float
    nodes: np.ndarray
    weights: np.ndarray
    blocks: int
    A: np.ndarray

    def det(self):
        sign, logdet = np.linalg.slogdet(np.eye(self.A.shape[0]) - self.A)
        return float(sign * math.exp(logdet)) if sign != 0 else 0.0

    def logdet(self):
        sign, logdet = np.linalg.slogdet(np.eye(self.A.shape[0]) - self.A)
        return float(logdet) if sign > 0 else -math.inf


def quadrature_rule(s, g, x_max=None):
    x_max = s + DEFAULT_SPAN if x_max is None else x_max
    if not x_max > s:
        raise ValueError("x_max must exceed s")
    x, w = gauss_legendre(g, s, x_max)
    return x, w, x_max


def scalar_operator(kernel, s, g, x_max=None) -> NystromOperator:
    """A[i, j] = sqrt(q_i) K(x_i, x_j) sqrt(q_j); `kernel` maps (x[:, None], y[None, :]) to a matrix."""
    x, q, x_max = quadrature_rule(s, g, x_max)
    r = np.sqrt(q)
    A = r[:, None] * kernel(x[:, None], x[None, :]) * r[None, :]
    return NystromOperator(s=s, x_max=x_max, nodes=x, weights=q, blocks=1, A=A)


def det_scalar(kernel, s, g=60, x_max=None, check=False, tol=1e-8):
    """det(I - K) on (s, x_max). With check=True the node count is doubled once and compared."""
    d = scalar_operator(kernel, s, g, x_max).det()
    if check:
        d2 = scalar_operator(kernel, s, 2 * g, x_max).det()
        if abs(d2 - d) > tol:
            raise ConvergenceError(f"determinant changed by {abs(d2 - d):.2e} under node doubling")
        return d2
    return d


def eps_matrix(x, q, a, b):
    """Spectral matrix of f -> (1/2)(int_a^x f - int_x^b f) at Gauss-Legendre nodes x."""
    C = cumulative_integration_matrix(x, a, b)
    return C - 0.5 * q[None, :]


def block_operator(S, D, I, x, q, x_max, s) -> NystromOperator:
    """Nystrom matrix of [[S, D], [I - eps, S^T]] (entries sampled at the nodes), weighted."""
    g = len(x)
    E = eps_matrix(x, q, s, x_max)
    top = np.hstack([S * q[None, :], D * q[None, :]])
    bottom = np.hstack([I * q[None, :] - E, S.T * q[None, :]])
    A0 = np.vstack([top, bottom])
    w = weight(x)
    lam = np.concatenate([np.sqrt(q * w), np.sqrt(q / w)])
    A = lam[:, None] * A0 / lam[None, :]
    return NystromOperator(s=s, x_max=x_max, nodes=x, weights=q, blocks=2, A=A)


def det_half(op: NystromOperator):
    """Principal square root of det(I - A); small negative values are clamped to 0."""
    d = op.det()
    if d < -NEGATIVE_TOL:
        raise PrecisionError(f"block determinant is negative ({d:.3e})")
    return math.sqrt(max(d, 0.0))


def tw_gue(s, g=60, x_max=None):
    """F2(s) = det(I - Q_Ai) on (s, infinity)."""
    _check_s(s)
    return det_scalar(q_airy, s, g, x_max)


def goe_operator(s, g=60, x_max=None) -> NystromOperator:
    x, q, x_max = quadrature_rule(s, g, x_max)
    A = matrix_airy(x)
    return block_operator(A.S, A.D, A.I, x, q, x_max, s)


def tw_goe(s, g=60, x_max=None):
    """F1(s) = det(I - Qhat_Ai)^(1/2) on (s, infinity)."""
    _check_s(s)
    return det_half(goe_operator(s, g, x_max))


def tw_goe_ferrari_spohn(s, g=60, x_max=None):
    """Independent F1: det(I - B) on (s, infinity), B(x, y) = Ai((x + y) / 2) / 2."""
    return det_scalar(lambda x, y: 0.5 * ai(0.5 * (x + y)), s, g, x_max)


def _check_s(s):
    if not -10.0 <= s <= 8.0:
        raise ValueError("s must lie in [-10, 8]")


def finite_n_gap(T, s, beta, g=80, x_max=None, gamma=None, bank=None, moments=None):
    """Probability of no scaled eigenvalue in (s, x_max) at finite n, from the edge-scaled kernels.

    beta = 2 uses det(I - K); beta = 1 uses det^(1/2) of the 2x2 block kernel. The right
    end is capped where the native point 2 + x/c reaches L.
    """
    from .potential import equilibrium
    from .skewkernel import PsiBank, build_moments, edge_kernels, kernel_K, edge_grid

    if beta not in (1, 2):
        raise ValueError("beta must be 1 or 2")
    gamma = equilibrium(T.potential).gamma if gamma is None else gamma
    c = gamma * T.n ** (2.0 / 3.0)
    cap = c * (T.L - 2.0)
    x_max = min(s + DEFAULT_SPAN if x_max is None else x_max, cap)
    if x_max <= s:
        return 1.0
    x, q, x_max = quadrature_rule(s, g, x_max)
    if beta == 2:
        K = kernel_K(T, edge_grid(x, gamma, T.n)) / c
        r = np.sqrt(q)
        op = NystromOperator(s=s, x_max=x_max, nodes=x, weights=q, blocks=1,
                             A=r[:, None] * K * r[None, :])
        return op.det()
    bank = bank or PsiBank(T)
    moments = moments or build_moments(T, bank)
    B = edge_kernels(T, x, gamma=gamma, moments=moments, bank=bank)
    return det_half(block_operator(B.S, B.D, B.I, x, q, x_max, s))


def tw_table(s_grid, g=60, x_max=None):
    """Rows (s, F1, F2, resolution, est_error); est_error is the change under node doubling."""
    rows = []
    for s in s_grid:
        f1, f2 = tw_goe(s, g, x_max), tw_gue(s, g, x_max)
        f1b, f2b = tw_goe(s, 2 * g, x_max), tw_gue(s, 2 * g, x_max)
        rows.append((float(s), f1b, f2b, 2 * g, max(abs(f1b - f1), abs(f2b - f2))))
    return rows
