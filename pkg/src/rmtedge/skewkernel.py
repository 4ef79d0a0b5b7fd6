"""Correlation kernels of the unitary and orthogonal ensembles built from psi_l.

Notation (native scale, lambda, mu in [-L, L])::

    K(lambda, mu) = sum_{l<n} psi_l(lambda) psi_l(mu)
    M[j, l]       = n (psi_j, eps psi_l),        eps f(x) = (1/2) int sign(x - t) f(t) dt
    S(lambda, mu) = -n sum_{i,j} psi_i(lambda) Minv[i, j] eps psi_j(mu)
    D(lambda, mu) = -d/dmu S = n sum_{i,j} psi_i(lambda) Minv[i, j] psi_j(mu)
    I(lambda, mu) = eps_lambda S = -n sum_{i,j} eps psi_i(lambda) Minv[i, j] eps psi_j(mu)

The orthogonal-ensemble matrix kernel is [[S, D], [I - eps(lambda - mu), S^T]].
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numpy.polynomial import Chebyshev

from .airy import matrix_airy, q_airy
from .errors import FormatError, IllConditioned
from .orthopoly import RecurrenceTable, psi_table
from .potential import Potential, equilibrium, truncate_potential
from .quadrature import ChebyshevAntiderivative, chebyshev_lobatto, gauss_legendre

COND_LIMIT = 1e12
_CHEB_TAIL_TOL = 1e-14


def epsilon_apply(f, x, L, nodes=200):
    """(eps f)(x) = (int_{-L}^x f - int_x^L f) / 2 with a Gauss rule on each side of the kink."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t, w = gauss_legendre(nodes, 0.0, 1.0)
    left_len = (x + L)[:, None]
    right_len = (L - x)[:, None]
    left = (f(-L + left_len * t) * w).sum(axis=1) * left_len[:, 0]
    right = (f(x[:, None] + right_len * t) * w).sum(axis=1) * right_len[:, 0]
    return 0.5 * (left - right)


class PsiBank:
    """psi_0..psi_lmax together with eps psi_l from a Chebyshev antiderivative on [-L, L].

    The number of Chebyshev points doubles until the trailing coefficients fall
    below 1e-14 of the largest one.
    """

    def __init__(self, T: RecurrenceTable, lmax: int | None = None, points: int | None = None,
                 max_points: int = 1 << 14):
        self.T = T
        self.lmax = T.n if lmax is None else int(lmax)
        L = T.L
        npts = points or (4 * self.lmax + 257)
        while True:
            nodes = chebyshev_lobatto(npts, -L, L)
            anti = ChebyshevAntiderivative(psi_table(T, nodes, self.lmax).T, -L, L)
            if anti.tail <= _CHEB_TAIL_TOL or 2 * npts > max_points:
                break
            npts = 2 * npts - 1
        self.points = npts
        self.resolution = anti.tail
        self._anti = anti
        self._half_total = 0.5 * anti(np.array([L]))[0]

    def psi(self, x, deriv=False):
        return psi_table(self.T, x, self.lmax, deriv)

    def eps(self, x):
        """eps psi_l(x) as an (lmax+1, len(x)) array."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return (self._anti(x) - self._half_total).T


@dataclass(frozen=True)
class SkewMoments:
    n: int
    M: np.ndarray
    Minv: np.ndarray
    cond: float
    diagnostics: dict = field(default_factory=dict, compare=False)


def build_moments(T: RecurrenceTable, bank: PsiBank | None = None, nodes: int | None = None) -> SkewMoments:
    """M[j, l] = n (psi_j, eps psi_l) for j, l < n, made exactly skew by reflection."""
    n = T.n
    if n % 2:
        raise ValueError("the orthogonal-ensemble kernel needs even n")
    bank = bank or PsiBank(T)
    x, w = gauss_legendre(nodes or bank.points + 64, -T.L, T.L)
    psi = bank.psi(x)[:n]
    eps = bank.eps(x)[:n]
    raw = n * (psi * w) @ eps.T
    upper = np.triu(raw, 1)
    M = upper - upper.T
    parity = (np.add.outer(np.arange(n), np.arange(n)) % 2) == 0
    diag = {"skew_defect": float(np.max(np.abs(raw + raw.T))),
            "checkerboard_max": float(np.max(np.abs(raw[parity]))),
            "cheb_points": bank.points, "cheb_tail": bank.resolution}
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditioned(f"skew-moment matrix condition number {cond:.3e}", cond=cond)
    Minv = np.linalg.inv(M)
    diag["inverse_residual"] = float(np.max(np.abs(Minv @ M - np.eye(n))))
    return SkewMoments(n=n, M=M, Minv=Minv, cond=cond, diagnostics=diag)


# --- kernels ----------------------------------------------------------------

NATIVE = ("native",)


@dataclass(frozen=True)
class KernelBundle:
    """Kernel values on grid_x[:, None], grid_y[None, :]; `scale` is NATIVE or ("edge", gamma, n)."""

    grid_x: np.ndarray
    grid_y: np.ndarray
    K: np.ndarray
    S: np.ndarray | None = None
    D: np.ndarray | None = None
    I: np.ndarray | None = None
    dK: np.ndarray | None = None  # d/dmu K
    scale: tuple = NATIVE

    @property
    def eps(self):
        return 0.5 * np.sign(self.grid_x[:, None] - self.grid_y[None, :])

    @property
    def is_edge(self):
        return self.scale[0] == "edge"


def _as_grid(g):
    return np.atleast_1d(np.asarray(g, dtype=float))


def kernel_K(T: RecurrenceTable, x, y=None, deriv=False):
    """K_n on x[:, None], y[None, :]; with deriv=True also d/dy K_n."""
    x = _as_grid(x)
    y = x if y is None else _as_grid(y)
    n = T.n
    px = psi_table(T, x, n - 1)
    if deriv:
        py, dpy = psi_table(T, y, n - 1, deriv=True)
        return px.T @ py, px.T @ dpy
    return px.T @ psi_table(T, y, n - 1)


def christoffel_darboux_defect(T: RecurrenceTable, x, y):
    """max |K(x,y)(x-y) - J_n (psi_n(x)psi_{n-1}(y) - psi_{n-1}(x)psi_n(y))|."""
    x, y = _as_grid(x), _as_grid(y)
    n = T.n
    K = kernel_K(T, x, y)
    px = psi_table(T, x, n)
    py = psi_table(T, y, n)
    rhs = T.J[n] * (np.outer(px[n], py[n - 1]) - np.outer(px[n - 1], py[n]))
    return float(np.max(np.abs(K * (x[:, None] - y[None, :]) - rhs)))


def _polynomial_potential(V: Potential, m=None) -> Potential:
    if V.poly is not None:
        return V
    if m is None:
        raise ValueError("non-polynomial potential needs a truncation degree m")
    return truncate_potential(V, m)


def vprime_of_J(T: RecurrenceTable, V: Potential | None = None, m=None, size=None):
    """V'(J) for the Jacobi matrix J (zero diagonal), truncated to `size` rows.

    Entries (j, k) with j, k < size - deg V' are exact.
    """
    V = _polynomial_potential(V or T.potential, m)
    size = size or T.K
    off = T.J[1:size]
    J = np.diag(off, 1) + np.diag(off, -1)
    dp = V.deriv_poly().convert(kind=Chebyshev)
    c = dp.coef
    a, b = dp.mapparms()
    X = a * np.eye(size) + b * J
    # Clenshaw with matrix argument
    b1 = np.zeros_like(X)
    b2 = np.zeros_like(X)
    eye = np.eye(size)
    for ck in c[:0:-1]:
        b1, b2 = 2.0 * X @ b1 - b2 + ck * eye, b1
    return X @ b1 - b2 + c[0] * eye


def vs_sum(T: RecurrenceTable, V: Potential | None = None, m=None):
    """V^s_n = sum_{k<n} sum_{j>=n} V'(J)[j, k]; tends to P(2)."""
    W = vprime_of_J(T, V, m)
    n = T.n
    return float(W[n:, :n].sum())


def kernel_K_via_VJ(T: RecurrenceTable, x, y=None, V: Potential | None = None, m=None,
                    nodes=400, tail_tol=1e-6):
    """K_n from the V'(J) representation.

    K(l, u) = (n/2) sum_{k<n<=j} V'(J)[j, k] int_0^inf (psi_k(l+v) psi_j(u+v) + psi_k(u+v) psi_j(l+v)) dv,
    with the v-integral cut where every shifted point has passed L + 1/2.
    """
    x = _as_grid(x)
    y = x if y is None else _as_grid(y)
    n = T.n
    Vp = _polynomial_potential(V or T.potential, m)
    width = Vp.degree - 1
    W = vprime_of_J(T, Vp, size=min(T.K, n + 2 * width + 2))
    ks = np.arange(max(0, n - width), n)
    js = np.arange(n, n + width)
    C = W[np.ix_(js, ks)]  # (j, k)
    lo = min(x.min(), y.min())
    vmax = T.L + 0.5 - lo
    v, w = gauss_legendre(nodes, 0.0, vmax)
    lmax = js[-1]

    def shifted(g):
        vals = psi_table(T, (g[:, None] + v[None, :]).ravel(), lmax)
        return vals.reshape(lmax + 1, g.size, v.size)

    px, py = shifted(x), shifted(y)
    tail = float(np.max(np.abs(px[:, :, -1])) * np.max(np.abs(py[:, :, -1])))
    if tail > tail_tol:
        raise ValueError(f"v-integral tail {tail:.2e} above {tail_tol}")
    # U[k, b, q] = sum_j C[j, k] psi_j(y_b + v_q)
    Uy = np.einsum("jk,jbq->kbq", C, py[js])
    Ux = np.einsum("jk,jaq->kaq", C, px[js])
    term = np.einsum("kaq,kbq,q->ab", px[ks], Uy, w) + np.einsum("kbq,kaq,q->ab", py[ks], Ux, w)
    return 0.5 * n * term


def kernel_S(T: RecurrenceTable, moments: SkewMoments, x, y=None, bank: PsiBank | None = None,
             with_dK=True) -> KernelBundle:
    """K, S, D, I (and d/dmu K) of the orthogonal ensemble on a native grid."""
    x = _as_grid(x)
    y = x if y is None else _as_grid(y)
    n = T.n
    bank = bank or PsiBank(T)
    px = psi_table(T, x, n - 1)
    if with_dK:
        py, dpy = psi_table(T, y, n - 1, deriv=True)
    else:
        py, dpy = psi_table(T, y, n - 1), None
    ex = bank.eps(x)[:n]
    ey = bank.eps(y)[:n]
    A = n * moments.Minv
    left_psi = px.T @ A
    left_eps = ex.T @ A
    return KernelBundle(
        grid_x=x, grid_y=y,
        K=px.T @ py,
        S=-left_psi @ ey,
        D=left_psi @ py,
        I=-left_eps @ ey,
        dK=None if dpy is None else px.T @ dpy,
        scale=NATIVE,
    )


def edge_grid(x, gamma, n):
    """Native points 2 + x / (gamma n^(2/3))."""
    return 2.0 + _as_grid(x) / (gamma * n ** (2.0 / 3.0))


def scale_edge(B: KernelBundle, gamma, n) -> KernelBundle:
    """Divide S, K by c = gamma n^(2/3), D and dK by c^2; I is unchanged. Grids become edge coordinates."""
    if B.is_edge:
        raise ValueError("bundle is already edge-scaled")
    c = gamma * n ** (2.0 / 3.0)

    def sc(a, p):
        return None if a is None else a / c**p

    return replace(B, grid_x=c * (B.grid_x - 2.0), grid_y=c * (B.grid_y - 2.0),
                   K=sc(B.K, 1), S=sc(B.S, 1), D=sc(B.D, 2), I=B.I, dK=sc(B.dK, 2),
                   scale=("edge", float(gamma), int(n)))


def edge_kernels(T: RecurrenceTable, x, y=None, gamma=None, moments=None, bank=None) -> KernelBundle:
    """Edge-scaled bundle on edge coordinates x, y."""
    gamma = equilibrium(T.potential).gamma if gamma is None else gamma
    bank = bank or PsiBank(T)
    moments = moments or build_moments(T, bank)
    y = x if y is None else y
    B = kernel_S(T, moments, edge_grid(x, gamma, T.n), edge_grid(y, gamma, T.n), bank)
    return scale_edge(B, gamma, T.n)


def edge_eps_phi(T: RecurrenceTable, y, gamma, bank: PsiBank):
    """eps applied to the edge-scaled psi_n, in edge coordinates."""
    n = T.n
    c = gamma * n ** (2.0 / 3.0)
    return c * n ** (-1.0 / 6.0) * gamma ** -0.25 * bank.eps(edge_grid(y, gamma, n))[n]


def lemma_decomposition(T: RecurrenceTable, x, y=None, gamma=None, bank=None, moments=None):
    """Remainder S - K - (1/2) psi(x) eps phi(y) at edge scale, psi and phi the scaled psi_{n-1}, psi_n.

    Also returns the derivative counterpart D + dK + (1/2) psi(x) phi(y).
    """
    gamma = equilibrium(T.potential).gamma if gamma is None else gamma
    bank = bank or PsiBank(T)
    y = x if y is None else y
    B = edge_kernels(T, x, y, gamma, moments, bank)
    n = T.n
    amp = n ** (-1.0 / 6.0) * gamma ** -0.25
    lam_x = edge_grid(B.grid_x, gamma, n)
    lam_y = edge_grid(B.grid_y, gamma, n)
    psi_x = amp * psi_table(T, lam_x, n)[n - 1]
    phi_y = amp * psi_table(T, lam_y, n)[n]
    eps_phi = edge_eps_phi(T, B.grid_y, gamma, bank)
    r_S = B.S - B.K - 0.5 * np.outer(psi_x, eps_phi)
    r_D = B.D + B.dK + 0.5 * np.outer(psi_x, phi_y)
    return {"bundle": B, "remainder_S": r_S, "remainder_D": r_D,
            "sup_S": float(np.max(np.abs(r_S))), "sup_D": float(np.max(np.abs(r_D))),
            "scale": n ** (-1.0 / 3.0) * math.log(n) ** 6}


def edge_errors(B: KernelBundle):
    """Sup errors of an edge bundle against the limiting kernels; I is compared with I_Ai."""
    A = matrix_airy(B.grid_x, B.grid_y)
    Q = q_airy(B.grid_x[:, None], B.grid_y[None, :])
    return {"S": float(np.max(np.abs(B.S - A.S))),
            "D": float(np.max(np.abs(B.D - A.D))),
            "I": float(np.max(np.abs(B.I - A.I))),
            "K": float(np.max(np.abs(B.K - Q)))}


# --- export -----------------------------------------------------------------

_MAGIC = b"RMTK"
_VERSION = 1
_HEADER = struct.Struct("<4sHIIBdI")
_FIELDS = ("K", "S", "D", "I", "dK")


def bundle_rows(B: KernelBundle):
    """Long-format rows (x, y, K, S, D, I) for CSV export."""
    X, Y = np.meshgrid(B.grid_x, B.grid_y, indexing="ij")
    cols = [X.ravel(), Y.ravel()]
    names = ["x", "y"]
    for f in ("K", "S", "D", "I"):
        a = getattr(B, f)
        if a is not None:
            cols.append(a.ravel())
            names.append(f)
    return names, np.column_stack(cols)


def save_bundle_csv(B: KernelBundle, path):
    names, rows = bundle_rows(B)
    np.savetxt(path, rows, delimiter=",", header=",".join(names), comments="", fmt="%.17g")


def save_bundle(B: KernelBundle, path):
    """Versioned binary: header, grids, then each present field as little-endian float64."""
    mask = sum(1 << i for i, f in enumerate(_FIELDS) if getattr(B, f) is not None)
    gamma, n = (B.scale[1], B.scale[2]) if B.is_edge else (0.0, 0)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, B.grid_x.size, B.grid_y.size, mask, gamma, n))
        fh.write(np.asarray(B.grid_x, "<f8").tobytes())
        fh.write(np.asarray(B.grid_y, "<f8").tobytes())
        for f in _FIELDS:
            a = getattr(B, f)
            if a is not None:
                fh.write(np.asarray(a, "<f8").tobytes())


def load_bundle(path) -> KernelBundle:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError("truncated kernel file")
    magic, version, gx, gy, mask, gamma, n = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != _VERSION:
        raise FormatError(f"not a kernel bundle (magic={magic!r}, version={version})")
    nfields = bin(mask).count("1")
    expected = _HEADER.size + 8 * (gx + gy + nfields * gx * gy)
    if len(raw) != expected:
        raise FormatError("payload length does not match header")
    data = np.frombuffer(raw, "<f8", offset=_HEADER.size).astype(float)
    grid_x, grid_y, rest = data[:gx], data[gx:gx + gy], data[gx + gy:]
    fields = {}
    for i, f in enumerate(_FIELDS):
        if mask >> i & 1:
            fields[f], rest = rest[:gx * gy].reshape(gx, gy), rest[gx * gy:]
    scale = ("edge", gamma, n) if n else NATIVE
    return KernelBundle(grid_x=grid_x, grid_y=grid_y, scale=scale, **fields)
