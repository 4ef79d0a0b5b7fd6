"""Toeplitz approximation of the inverse skew-moment matrix.

With P_d, R_d the Fourier coefficients of P(2 cos y) and 1/P(2 cos y), Rs the n x n
section of R and D[j, k] = delta_{j+1,k} - delta_{j-1,k}, the inverse of M is close to

    Q + a b^T / 2,   Q[j] = Vc[j] / 2 (j <= n - 2m),   Q[j] = (Rs^-1 D)[j] / 2 (j > n - 2m),

where Vc[j, l] = sign(l - j) (psi_j, V' psi_l), a = Rs^-1 e_{n-1}, b = Rs^-1 r*, r*_k = R_{n-k}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import fft
from scipy.linalg import toeplitz

from .errors import ConditionViolation, ConvergenceError
from .orthopoly import RecurrenceTable, psi_table
from .potential import EquilibriumData, default_m
from .quadrature import gauss_legendre


def fourier_coefficients(f, tol=1e-12, k0=64, kmax=1 << 16):
    """c_d = (1/2pi) int_{-pi}^{pi} f(y) e^{i d y} dy for even f, d = 0..k/2, by the trapezoid rule.

    Doubles the sample count until the upper half of the coefficients is below `tol`.
    """
    k = k0
    while k <= kmax:
        y = 2.0 * np.pi * np.arange(k) / k
        c = fft(f(y)).real / k
        half = c[: k // 2 + 1]
        scale = max(float(np.max(np.abs(half))), 1e-300)
        if np.max(np.abs(half[k // 4:])) <= tol * scale:
            return half
        k *= 2
    raise ConvergenceError("Fourier coefficients did not decay to tolerance")


def default_toeplitz_m(V, n):
    """deg V / 2 for polynomial V (exact band), otherwise max(2, floor(log^2 n))."""
    if V.poly is not None and V.degree is not None:
        return max(1, V.degree // 2)
    return default_m(n)


@dataclass(frozen=True)
class ToeplitzPack:
    n: int
    m: int
    P: np.ndarray        # P_d, d = 0, 1, ...
    R: np.ndarray        # R_d, d = 0, 1, ...
    Rinv_section: np.ndarray
    D: np.ndarray
    a: np.ndarray
    b: np.ndarray
    P2: float

    @property
    def band(self):
        return 2 * self.m - 2

    def P_matrix(self, size):
        col = np.zeros(size)
        k = min(size, len(self.P))
        col[:k] = self.P[:k]
        return toeplitz(col)

    def R_section(self):
        return _section(self.R, self.n)


def _section(c, n):
    col = np.zeros(n)
    k = min(n, len(c))
    col[:k] = c[:k]
    return toeplitz(col)


def build_toeplitz(E: EquilibriumData, n: int, m: int | None = None) -> ToeplitzPack:
    """P_d, R_d by Fourier quadrature, the inverse R section, D, and the vectors a, b."""
    if E.rho_min <= 0:
        raise ConditionViolation(f"P is not positive on [-2, 2] (min {E.rho_min:.3e})")
    m = default_toeplitz_m(E.potential, n) if m is None else int(m)
    Pd = np.asarray(E.p_cheb, dtype=float).copy()
    Pd[1:] *= 0.5
    symbol = lambda y: E.P(2.0 * np.cos(y))  # noqa: E731
    Rd = fourier_coefficients(lambda y: 1.0 / symbol(y))
    if len(Rd) < n + 1:
        Rd = np.concatenate([Rd, np.zeros(n + 1 - len(Rd))])
    Rs = _section(Rd, n)
    Rinv = np.linalg.inv(Rs)
    D = np.eye(n, k=1) - np.eye(n, k=-1)
    e_last = np.zeros(n)
    e_last[-1] = 1.0
    rstar = Rd[n - np.arange(n)]  # r*_k = R_{n-k}
    a = Rinv @ e_last
    b = Rinv @ rstar
    return ToeplitzPack(n=n, m=m, P=Pd, R=Rd, Rinv_section=Rinv, D=D, a=a, b=b, P2=E.P2)


def band_defect(A, width):
    """Largest |A[j, k]| with |j - k| > width."""
    j, k = np.indices(A.shape)
    outside = np.abs(j - k) > width
    return float(np.max(np.abs(A[outside]))) if np.any(outside) else 0.0


def decay_fit(R, dmin=1, rel_floor=1e-13):
    """Fitted c in |R_d| ~ C e^{-c d} over the coefficients above the rounding floor."""
    R = np.abs(np.asarray(R))
    d = np.arange(len(R))
    keep = (d >= dmin) & (R > rel_floor * R[0])
    if np.count_nonzero(keep) < 2:
        return math.inf
    slope, _ = np.polyfit(d[keep], np.log(R[keep]), 1)
    return float(-slope)


def convolution_defect(pack: ToeplitzPack, span=None):
    """max_{|d| <= span} |(P * R)_d - delta_{d,0}|."""
    span = 4 * pack.m if span is None else span
    P = np.concatenate([pack.P[:0:-1], pack.P])
    R = np.concatenate([pack.R[:0:-1], pack.R])
    conv = np.convolve(P, R)
    mid = len(conv) // 2
    window = conv[mid - span: mid + span + 1].copy()
    window[span] -= 1.0
    return float(np.max(np.abs(window)))


def build_calV(T: RecurrenceTable, rows: int | None = None, cols: int | None = None, nodes=None):
    """Vc[j, l] = sign(l - j) (psi_j, V' psi_l) by Gauss-Legendre quadrature on [-L, L]."""
    rows = T.n if rows is None else rows
    cols = T.n if cols is None else cols
    size = max(rows, cols)
    x, w = gauss_legendre(nodes or T.quad_nodes, -T.L, T.L)
    psi = psi_table(T, x, size - 1)
    G = (psi[:rows] * (w * T.potential.eval_deriv(x))) @ psi[:cols].T
    sign = np.sign(np.subtract.outer(np.arange(cols), np.arange(rows))).T
    return sign * G


def reconstruct_Minv(pack: ToeplitzPack, calV, Minv_direct=None):
    """Q + a b^T / 2; with `Minv_direct` also returns the max-entry deviation."""
    n, m = pack.n, pack.m
    Q = np.empty((n, n))
    split = n - 2 * m  # rows 0..split use Vc
    Q[: split + 1] = 0.5 * calV[: split + 1, :n]
    Q[split + 1:] = 0.5 * (pack.Rinv_section @ pack.D)[split + 1:]
    approx = Q + 0.5 * np.outer(pack.a, pack.b)
    report = {"n": n, "m": m, "skew_defect": float(np.max(np.abs(approx + approx.T)))}
    if Minv_direct is not None:
        dev = float(np.max(np.abs(approx - Minv_direct)))
        scale = n ** -0.5 * math.log(n) ** 6
        report.update(residual=dev, normalized=dev / scale, rate_scale=scale)
    return approx, report


def indicator_u(n, m):
    u = np.zeros(n)
    u[n - 2 * m:] = 1.0
    return u


def scalar_identity_check(pack: ToeplitzPack):
    """Both sides of (a,u)(b,u) = (Rs^-1 e_{n-1}, u) - P(2), plus the two exact sub-identities."""
    n, m = pack.n, pack.m
    u = indicator_u(n, m)
    lhs = float((pack.a @ u) * (pack.b @ u))
    rhs = float(pack.a @ u - pack.P2)
    Du = pack.D @ u
    target = np.zeros(n)
    target[n - 1] -= 1.0
    target[n - 2 * m] += 1.0
    target[n - 2 * m - 1] += 1.0
    e = np.zeros(n)
    e[n - 2 * m] = e[n - 2 * m - 1] = 1.0
    Pu = float(pack.P_matrix(n) @ e @ u)
    return {"n": n, "m": m, "lhs": lhs, "rhs": rhs, "difference": abs(lhs - rhs),
            "scale": n ** -0.5 * m**2 * math.log(n),
            "Du_defect": float(np.max(np.abs(Du - target))),
            "Pu": Pu, "Pu_defect": abs(Pu - pack.P2)}


def fourier_V_identity(E: EquilibriumData, npts=257):
    """Checks sum_k V'_k sin(k x) = sin x P(2 cos x) and sum_k k V'_k = P(2)."""
    Vd = E.potential.eval_deriv
    coef = fourier_coefficients(lambda y: Vd(2.0 * np.cos(y)))
    k = np.arange(len(coef))
    x = np.linspace(-np.pi, np.pi, npts)
    lhs = np.sin(np.outer(x, k)) @ coef
    rhs = np.sin(x) * E.P(2.0 * np.cos(x))
    slope = float(k @ coef)
    return {"coefficients": coef, "identity_defect": float(np.max(np.abs(lhs - rhs))),
            "slope_at_zero": slope, "slope_defect": abs(slope - E.P2)}


def residual_rows(reports):
    """(n, m, residual, normalized) rows for the CLI tables."""
    return [(r["n"], r["m"], r["residual"], r["normalized"]) for r in reports]
