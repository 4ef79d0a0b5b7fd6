"""Recurrence coefficients and weighted orthonormal functions for the weight exp(-n V) on [-L, L].

psi_l(x) = exp(-n V(x) / 2) p_l(x), where p_l are orthonormal polynomials, obey

    J_{l+1} psi_{l+1} + J_l psi_{l-1} = x psi_l,    J_0 = 0

(the diagonal coefficients vanish for even V).
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, FormatError, PrecisionError
from .potential import Potential, equilibrium
from .quadrature import gauss_legendre

ESCALATE_N = 150
ORTHO_TOL = 1e-6
CACHE_ENV = "RMTEDGE_CACHE"
_RESCALE = 1e200
_LOG_RESCALE = math.log(_RESCALE)
_MEMO: dict = {}


@dataclass(frozen=True)
class RecurrenceTable:
    """Jacobi coefficients J[0..K] (J[0] = 0) for the weight exp(-n V) on [-L, L]."""

    potential: Potential
    n: int
    J: np.ndarray
    log_norm: float  # log of int exp(-n (V - vmin)) over [-L, L]
    vmin: float
    quad_nodes: int
    precision: str
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def K(self):
        return len(self.J) - 1

    @property
    def L(self):
        return self.potential.L

    @property
    def q(self):
        return np.zeros(self.K + 1)

    def psi(self, x, lmax=None, deriv=False):
        return psi_table(self, x, lmax, deriv)


def default_K(n, extra=16):
    return n + int(math.ceil(2.0 * math.sqrt(n))) + extra


def _lanczos(x, sqrtw, K, dtype):
    """Lanczos with full re-orthogonalization on diag(x) from the start vector sqrtw."""
    x = np.asarray(x, dtype=dtype)
    v = np.asarray(sqrtw, dtype=dtype)
    v = v / np.sqrt(v @ v)
    N = len(x)
    if K + 1 > N:
        raise ValueError("more recurrence coefficients requested than quadrature nodes")
    basis = np.zeros((K + 1, N), dtype=dtype)
    basis[0] = v
    J = np.zeros(K + 1, dtype=dtype)
    alpha = np.zeros(K + 1, dtype=dtype)
    worst_projection = 0.0
    for k in range(K):
        w = x * basis[k]
        if k > 0:
            w -= J[k] * basis[k - 1]
        alpha[k] = basis[k] @ w
        w -= alpha[k] * basis[k]
        for sweep in range(2):
            c = basis[: k + 1] @ w
            if sweep == 0:
                nrm = np.sqrt(w @ w)
                if nrm > 0:
                    worst_projection = max(worst_projection, float(np.max(np.abs(c)) / nrm))
            w -= c @ basis[: k + 1]
        J[k + 1] = np.sqrt(w @ w)
        if not J[k + 1] > 0:
            raise PrecisionError(f"Lanczos breakdown at step {k + 1}")
        basis[k + 1] = w / J[k + 1]
    alpha[K] = basis[K] @ (x * basis[K])
    gram = basis @ basis.T
    gram_residual = float(np.max(np.abs(gram - np.eye(K + 1, dtype=dtype))))
    return J, alpha, gram_residual, worst_projection


def _discretize(V, n, nodes):
    x, q = gauss_legendre(nodes, -V.L, V.L)
    vx = V.eval(x)
    vmin = float(np.min(vx))
    logw = np.log(q) - n * (vx - vmin)
    lognorm = float(np.log(np.sum(np.exp(logw))))
    return x, np.exp(0.5 * logw), lognorm, vmin


def _run(V, n, K, nodes, dtype):
    x, sqrtw, lognorm, vmin = _discretize(V, n, nodes)
    J, alpha, gram_res, proj = _lanczos(x, sqrtw, K, dtype)
    return np.asarray(J, dtype=float), np.asarray(alpha, dtype=float), lognorm, vmin, gram_res, proj


def build_recurrence(V: Potential, n: int, K: int | None = None, nodes: int | None = None,
                     precision: str = "auto", tol: float = 1e-12, max_doublings: int = 3,
                     cache: bool | str | Path = False) -> RecurrenceTable:
    """Discretized Stieltjes (Lanczos) procedure against a Gauss-Legendre rule on [-L, L].

    The node count starts at 4K + 200 and doubles until the coefficients agree to
    `tol`. `precision` is "double", "extended" (80-bit long double) or "auto",
    which picks extended for n >= 150 or after an orthogonality failure.
    """
    if n < 1:
        raise ValueError("n must be positive")
    K = default_K(n) if K is None else int(K)
    nodes = 4 * K + 200 if nodes is None else int(nodes)
    if max_doublings < 1:
        raise ValueError("max_doublings must be at least 1")
    if precision not in ("auto", "double", "extended"):
        raise ValueError(f"unknown precision mode {precision!r}")

    key = V.key()
    memo_key = None if key is None else (key, n, K, nodes, precision, tol)
    if memo_key in _MEMO:
        return _MEMO[memo_key]
    cache_dir = _cache_dir(cache)
    if cache_dir is not None and key is not None:
        path = cache_dir / f"rec_{key}_n{n}_K{K}.bin"
        if path.exists():
            table = load_table(path, V)
            _MEMO[memo_key] = table
            return table

    mode = precision
    if mode == "auto":
        mode = "extended" if n >= ESCALATE_N else "double"
    dtype = np.longdouble if mode == "extended" else np.float64

    J, alpha, lognorm, vmin, gram_res, proj = _run(V, n, K, nodes, dtype)
    if gram_res > ORTHO_TOL and mode == "double" and precision == "auto":
        mode, dtype = "extended", np.longdouble
        J, alpha, lognorm, vmin, gram_res, proj = _run(V, n, K, nodes, dtype)
    if gram_res > ORTHO_TOL:
        raise PrecisionError(f"orthogonality residual {gram_res:.2e} exceeds {ORTHO_TOL}")

    change = None
    for _ in range(max_doublings):
        J2, alpha2, lognorm2, vmin2, gram2, proj2 = _run(V, n, K, 2 * nodes, dtype)
        change = float(np.max(np.abs(J2 - J)))
        nodes *= 2
        J, alpha, lognorm, vmin, gram_res, proj = J2, alpha2, lognorm2, vmin2, gram2, proj2
        if change <= tol:
            break
    else:
        raise ConvergenceError(f"recurrence coefficients unstable under node doubling ({change:.2e})")

    diag = {"node_doubling_change": change, "gram_residual": gram_res,
            "max_projection": proj, "max_abs_diagonal": float(np.max(np.abs(alpha)))}
    J[0] = 0.0
    table = RecurrenceTable(potential=V, n=n, J=J, log_norm=lognorm, vmin=vmin,
                            quad_nodes=nodes, precision=mode, diagnostics=diag)
    if cache_dir is not None and key is not None:
        save_table(table, cache_dir / f"rec_{key}_n{n}_K{K}.bin")
    if memo_key is not None:
        _MEMO[memo_key] = table
    return table


def psi_table(T: RecurrenceTable, x, lmax=None, deriv=False):
    """psi_l(x) for l = 0..lmax as a (lmax+1, len(x)) array; optionally the x-derivatives.

    Runs the three-term recurrence on a scaled copy of p_l with a per-point log
    scale, so exp(-n V / 2) may underflow without destroying higher l.
    """
    lmax = T.K if lmax is None else int(lmax)
    if lmax > T.K:
        raise ValueError(f"lmax={lmax} exceeds the table size K={T.K}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n, J = T.n, T.J
    V = T.potential
    logscale = -0.5 * n * (V.eval(x) - T.vmin) - 0.5 * T.log_norm
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    out = np.empty((lmax + 1, x.size))
    out[0] = np.exp(logscale)
    if deriv:
        d_prev = np.zeros_like(x)
        d = np.zeros_like(x)
        dout = np.empty_like(out)
        dout[0] = 0.0
    for l in range(lmax):
        p_next = (x * p - J[l] * p_prev) / J[l + 1]
        if deriv:
            d_next = (p + x * d - J[l] * d_prev) / J[l + 1]
            d_prev, d = d, d_next
        p_prev, p = p, p_next
        big = np.abs(p) > _RESCALE
        if np.any(big):
            p[big] /= _RESCALE
            p_prev[big] /= _RESCALE
            if deriv:
                d[big] /= _RESCALE
                d_prev[big] /= _RESCALE
            logscale[big] += _LOG_RESCALE
        factor = np.exp(logscale)
        out[l + 1] = p * factor
        if deriv:
            dout[l + 1] = d * factor
    if not np.all(np.isfinite(out)):
        raise PrecisionError("non-finite value in psi recurrence")
    if deriv:
        dout -= 0.5 * n * V.eval_deriv(x)[None, :] * out
        return out, dout
    return out


def eval_psi(T: RecurrenceTable, l: int, x):
    """psi_l at x (scalar or array)."""
    vals = psi_table(T, x, lmax=l)[l]
    return vals[0] if np.ndim(x) == 0 else vals


def gram_matrix(T: RecurrenceTable, lmax=None, nodes=None):
    """(psi_j, psi_l) on [-L, L] with an independent Gauss-Legendre rule."""
    lmax = T.K if lmax is None else lmax
    x, q = gauss_legendre(nodes or T.quad_nodes + 101, -T.L, T.L)
    P = psi_table(T, x, lmax)
    return (P * q) @ P.T


def edge_scale(T: RecurrenceTable, gamma=None):
    """gamma n^(2/3): the factor in x = gamma n^(2/3) (lambda - 2)."""
    if gamma is None:
        gamma = equilibrium(T.potential).gamma
    return gamma * T.n ** (2.0 / 3.0)


def edge_psi(T: RecurrenceTable, which: int, x, gamma=None):
    """n^(-1/6) gamma^(-1/4) psi_which(2 + x / (gamma n^(2/3))), which in {n, n-1}."""
    if gamma is None:
        gamma = equilibrium(T.potential).gamma
    lam = 2.0 + np.asarray(x, dtype=float) / (gamma * T.n ** (2.0 / 3.0))
    return T.n ** (-1.0 / 6.0) * gamma ** -0.25 * eval_psi(T, which, lam)


def verify_jacobi_asymptotics(T: RecurrenceTable, P2=None):
    """max over |k| <= 2 sqrt(n) of |J_{n+k} - 1 - k/(2 n P(2))| n^2 / (k^2 + n^(2/3))."""
    n = T.n
    if P2 is None:
        P2 = equilibrium(T.potential).P2
    kmax = int(math.floor(2.0 * math.sqrt(n)))
    if n + kmax > T.K:
        raise ValueError("table too short for the |k| <= 2 sqrt(n) window")
    k = np.arange(-kmax, kmax + 1)
    resid = np.abs(T.J[n + k] - 1.0 - k / (2.0 * n * P2)) * n**2 / (k**2 + n ** (2.0 / 3.0))
    return {"n": n, "constant": float(np.max(resid)), "k_at_max": int(k[np.argmax(resid)]),
            "J_n_minus_1": float(T.J[n] - 1.0)}


# --- binary cache -----------------------------------------------------------

_MAGIC = b"RMTJ"
_VERSION = 1
_HEADER = struct.Struct("<4sHIIBddd16s")
_PRECISION_CODES = {"double": 0, "extended": 1}


def _cache_dir(cache):
    if cache is False or cache is None:
        return None
    if cache is True:
        env = os.environ.get(CACHE_ENV)
        if not env:
            return None
        cache = env
    path = Path(cache)
    path.mkdir(parents=True, exist_ok=True)
    return path


def save_table(T: RecurrenceTable, path):
    key = (T.potential.key() or "").encode()[:16].ljust(16, b"\0")
    header = _HEADER.pack(_MAGIC, _VERSION, T.n, T.K, _PRECISION_CODES[T.precision],
                          T.L, T.vmin, T.log_norm, key)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(struct.pack("<I", T.quad_nodes))
        fh.write(np.asarray(T.J, dtype="<f8").tobytes())


def load_table(path, V: Potential) -> RecurrenceTable:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + 4:
        raise FormatError("truncated recurrence cache file")
    magic, version, n, K, pcode, L, vmin, lognorm, key = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != _VERSION:
        raise FormatError(f"not a recurrence table (magic={magic!r}, version={version})")
    expected = (V.key() or "").encode()[:16].ljust(16, b"\0")
    if key != expected or abs(L - V.L) > 0:
        raise FormatError("cached table belongs to a different potential")
    (nodes,) = struct.unpack_from("<I", raw, _HEADER.size)
    J = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size + 4).astype(float)
    if len(J) != K + 1:
        raise FormatError("payload length does not match header")
    precision = {v: k for k, v in _PRECISION_CODES.items()}[pcode]
    return RecurrenceTable(potential=V, n=n, J=J, log_norm=lognorm, vmin=vmin,
                           quad_nodes=nodes, precision=precision,
                           diagnostics={"loaded_from": str(path)})
