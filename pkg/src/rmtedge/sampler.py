"""Eigenvalue samples from Gaussian matrix models and from the log-gas density by Metropolis.

The log-gas density of n points on [-L, L] is

    p(lam) ~ prod_i exp(-n beta V(lam_i) / 2) prod_{i<j} |lam_i - lam_j|^beta.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import FormatError
from .potential import EquilibriumData, Potential

TARGET_ACCEPTANCE = 0.3
_CHUNK = 500


@dataclass(frozen=True)
class SampleBatch:
    n: int
    beta: int
    potential: str
    seed: int
    draws: np.ndarray  # (count, n), each row ascending
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def count(self):
        return self.draws.shape[0]


def sample_gaussian(n, beta, count, seed=0) -> SampleBatch:
    """Spectra of GOE (beta=1) or GUE (beta=2) matrices with density ~ exp(-n beta Tr M^2 / 4).

    GOE: diagonal variance 2/n, off-diagonal 1/n. GUE: diagonal 1/n, real and imaginary
    parts of off-diagonal entries 1/(2n) each. The spectrum fills [-2, 2].
    """
    if beta not in (1, 2):
        raise ValueError("beta must be 1 or 2")
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = np.random.default_rng(seed)
    out = np.empty((count, n))
    for start in range(0, count, _CHUNK):
        k = min(_CHUNK, count - start)
        if beta == 1:
            G = rng.standard_normal((k, n, n))
            H = (G + G.transpose(0, 2, 1)) / math.sqrt(2.0 * n)
        else:
            G = rng.standard_normal((k, n, n)) + 1j * rng.standard_normal((k, n, n))
            H = (G + G.conj().transpose(0, 2, 1)) / (2.0 * math.sqrt(n))
        out[start:start + k] = np.linalg.eigvalsh(H)
    return SampleBatch(n=n, beta=beta, potential="gaussian", seed=seed, draws=out,
                       meta={"method": "direct"})


def _log_weight(V: Potential, lam, n, beta):
    return -0.5 * n * beta * V.eval(lam)


def mcmc_loggas(V: Potential, n, beta, steps, seed=0, chains=1000, burn_in=None, thin=20,
                width=None) -> SampleBatch:
    """Single-site Metropolis on [-L, L], many independent chains updated in lockstep.

    `steps` counts sweeps (n site updates each) after burn-in; every `thin` sweeps each
    chain contributes one draw. The proposal width adapts towards 0.3 acceptance during
    burn-in and is frozen afterwards.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    burn_in = max(200, steps // 4) if burn_in is None else burn_in
    rng = np.random.default_rng(seed)
    L = V.L
    # start on semicircle quantiles with a small jitter
    u = (np.arange(n) + 0.5) / n
    start = 2.0 * np.sin(np.pi * (u - 0.5))
    lam = start[None, :] + 0.01 * rng.standard_normal((chains, n))
    lam = np.clip(lam, -L, L)
    logw = _log_weight(V, lam, n, beta)
    h = 1.0 / n if width is None else width
    rows = np.arange(chains)
    draws = []
    accepted = proposed = 0
    total = burn_in + steps
    for sweep in range(total):
        acc_sweep = 0
        for i in range(n):
            old = lam[:, i]
            new = old + h * rng.standard_normal(chains)
            inside = np.abs(new) <= L
            new_w = np.where(inside, _log_weight(V, np.clip(new, -L, L), n, beta), -np.inf)
            others = np.delete(lam, i, axis=1)
            with np.errstate(divide="ignore"):
                delta = beta * (np.log(np.abs(new[:, None] - others)).sum(axis=1)
                                - np.log(np.abs(old[:, None] - others)).sum(axis=1))
            log_ratio = new_w - logw[rows, i] + delta
            if np.any(np.isnan(log_ratio[inside])):
                raise FloatingPointError("NaN in log-density")
            accept = inside & (np.log(rng.random(chains)) < log_ratio)
            lam[accept, i] = new[accept]
            logw[accept, i] = new_w[accept]
            acc_sweep += int(np.count_nonzero(accept))
        rate = acc_sweep / (chains * n)
        if sweep < burn_in:
            h *= math.exp(rate - TARGET_ACCEPTANCE)
        else:
            accepted += acc_sweep
            proposed += chains * n
            if (sweep - burn_in + 1) % thin == 0:
                draws.append(np.sort(lam, axis=1))
    acceptance = accepted / proposed if proposed else float("nan")
    if not 0.05 <= acceptance <= 0.95:
        warnings.warn(f"Metropolis acceptance {acceptance:.3f} outside [0.05, 0.95]")
    data = np.concatenate(draws, axis=0) if draws else np.empty((0, n))
    return SampleBatch(n=n, beta=beta, potential=V.name, seed=seed, draws=data,
                       meta={"method": "mcmc", "acceptance": acceptance, "width": h,
                             "chains": chains, "burn_in": burn_in, "thin": thin})


def two_state_metropolis(p, steps, seed=0, chains=1000):
    """Metropolis with flip proposals on {0, 1} targeting (p, 1 - p); returns the visit frequency of 0."""
    rng = np.random.default_rng(seed)
    per_chain = max(1, steps // chains)
    state = (rng.random(chains) >= p).astype(int)  # start from the target
    target = np.array([p, 1.0 - p])
    visits0 = 0
    for _ in range(per_chain):
        ratio = target[1 - state] / target[state]
        flip = rng.random(chains) < ratio
        state = np.where(flip, 1 - state, state)
        visits0 += int(np.count_nonzero(state == 0))
    return visits0 / (per_chain * chains)


def scaled_maxima(B: SampleBatch, gamma):
    return gamma * B.n ** (2.0 / 3.0) * (B.draws[:, -1] - 2.0)


def edge_statistics(B: SampleBatch, gamma, s_grid):
    """Empirical CDF of gamma n^(2/3) (lambda_max - 2) on s_grid, and the empirical gap probability.

    Both are computed against the same native thresholds 2 + s / (gamma n^(2/3)).
    """
    if B.count == 0:
        raise ValueError("empty batch")
    s_grid = np.asarray(s_grid, dtype=float)
    thresholds = 2.0 + s_grid / (gamma * B.n ** (2.0 / 3.0))
    lam_max = B.draws[:, -1]
    cdf = (lam_max[None, :] <= thresholds[:, None]).mean(axis=1)
    gap = np.array([np.mean(~np.any(B.draws > t, axis=1)) for t in thresholds])
    return {"s": s_grid, "cdf": cdf, "gap": gap}


def ks_distance(samples, cdf):
    """sup |F_emp - F| for a continuous CDF `cdf` (vectorized callable)."""
    x = np.sort(np.asarray(samples, dtype=float))
    m = len(x)
    F = cdf(x)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))


def semicircle_cdf(x):
    x = np.clip(np.asarray(x, dtype=float), -2.0, 2.0)
    return 0.5 + (x * np.sqrt(4.0 - x * x) / 2.0 + 2.0 * np.arcsin(x / 2.0)) / (2.0 * np.pi)


def equilibrium_cdf(E: EquilibriumData, points=4001):
    """CDF of rho as a callable, integrating in the angle variable x = -2 cos t."""
    t = np.linspace(0.0, np.pi, points)
    x = -2.0 * np.cos(t)
    # rho(x) dx = P(x) sqrt(4 - x^2)/(2 pi) * 2 sin t dt = P(x) 2 sin^2 t / pi dt
    dens = E.P(x) * 2.0 * np.sin(t) ** 2 / np.pi
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(t))])
    cum /= cum[-1]
    spline = CubicSpline(x, cum)
    return lambda y: np.clip(spline(np.clip(np.asarray(y, dtype=float), -2.0, 2.0)), 0.0, 1.0)


@lru_cache(maxsize=8)
def tw_cdf(beta, lo=-8.0, hi=6.0, step=0.05, g=40):
    """Spline interpolant of F1 or F2 on [lo, hi]; 0 below and 1 above."""
    from .fredholm import tw_goe, tw_gue
    f = tw_goe if beta == 1 else tw_gue
    s = np.arange(lo, hi + step / 2, step)
    vals = np.array([f(v, g) for v in s])
    spline = CubicSpline(s, vals)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < lo, 0.0, np.where(x > hi, 1.0, np.clip(spline(np.clip(x, lo, hi)), 0.0, 1.0)))
    return cdf


# --- persistence ------------------------------------------------------------

_MAGIC = b"RMTS"
_VERSION = 1
_HEADER = struct.Struct("<4sHIBIQ32s")


def save_batch(B: SampleBatch, path):
    """Header (n, beta, count, seed, potential name) then little-endian float64 draws."""
    name = B.potential.encode()[:32].ljust(32, b"\0")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, B.n, B.beta, B.count, B.seed, name))
        fh.write(np.asarray(B.draws, dtype="<f8").tobytes())


def load_batch(path) -> SampleBatch:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError("truncated sample file")
    magic, version, n, beta, count, seed, name = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != _VERSION:
        raise FormatError(f"not a sample batch (magic={magic!r}, version={version})")
    if len(raw) != _HEADER.size + 8 * n * count:
        raise FormatError("payload length does not match header")
    draws = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(count, n).astype(float)
    return SampleBatch(n=n, beta=beta, potential=name.rstrip(b"\0").decode(), seed=seed, draws=draws)


def save_batch_csv(B: SampleBatch, path):
    header = ",".join(f"lambda_{i}" for i in range(B.n))
    np.savetxt(path, B.draws, delimiter=",", header=header, comments="", fmt="%.17g")
