"""Even one-cut potentials, their equilibrium density and the edge constant.

A potential is normalized so that the eigenvalue support is [-2, 2]. The
equilibrium density is rho(x) = P(x) sqrt(4 - x^2) / (2 pi), where P is the
average of the divided difference of V' over the cut.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial

from .errors import ConditionViolation, ConvergenceError
from .quadrature import gauss_legendre

SUPPORT = (-2.0, 2.0)


@dataclass(frozen=True)
class Potential:
    """An even potential V with its derivative and analyticity strip.

    `poly` holds the polynomial form (power or Chebyshev series) when V is a
    polynomial or has been truncated with `truncate_potential`.
    """

    eval: Callable
    eval_deriv: Callable
    strip: tuple = (1.0, 1.0)
    poly: Optional[object] = None
    L: Optional[float] = None
    name: str = "custom"
    eval_deriv2: Optional[Callable] = None
    truncation_error: Optional[float] = None

    def __post_init__(self):
        d1, d2 = self.strip
        if d1 <= 0 or d2 <= 0:
            raise ValueError("strip parameters must be positive")
        if self.L is None:
            object.__setattr__(self, "L", 2.0 + d1 / 2.0)
        if self.L <= 2.0:
            raise ValueError("truncation half-width L must exceed the edge at 2")

    @classmethod
    def from_even_coeffs(cls, coeffs, name="polynomial", strip=(1.0, 1.0), L=None):
        """V(x) = sum_k coeffs[k] x^(2k)."""
        power = np.zeros(2 * len(coeffs) - 1)
        power[::2] = np.asarray(coeffs, dtype=float)
        p = Polynomial(power)
        dp = p.deriv()
        return cls(eval=p, eval_deriv=dp, strip=tuple(strip), poly=p, L=L,
                   name=name, eval_deriv2=dp.deriv())

    @property
    def degree(self):
        return None if self.poly is None else self.poly.degree()

    def deriv_poly(self):
        """V' as a numpy polynomial series, or None for non-polynomial V."""
        return None if self.poly is None else self.poly.deriv()

    def key(self):
        """Stable identifier used for caching; None when V has no finite description."""
        if self.poly is None:
            return None
        h = hashlib.sha256()
        h.update(type(self.poly).__name__.encode())
        h.update(np.asarray(self.poly.coef, dtype="<f8").tobytes())
        h.update(np.asarray(self.poly.domain, dtype="<f8").tobytes())
        h.update(np.float64(self.L).tobytes())
        return h.hexdigest()[:16]


BUILTINS = {
    "gaussian": (0.0, 0.5),
    "quartic12": (0.0, 0.0, 1.0 / 12.0),
    "quartic20": (0.0, 0.2, 0.05),
}


def builtin(name, strip=(1.0, 1.0), L=None):
    try:
        coeffs = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown builtin potential {name!r}; choose from {sorted(BUILTINS)}")
    return Potential.from_even_coeffs(coeffs, name=name, strip=strip, L=L)


def _evenness_defect(V, L, npts=2001):
    x = np.linspace(0.0, L, npts)
    return float(np.max(np.abs(V.eval(-x) - V.eval(x))))


def truncate_potential(V: Potential, m: int, validation_points=10_000) -> Potential:
    """Even Chebyshev interpolant of degree 2m to V on [-L, L].

    The sup error on a `validation_points` grid is stored in `truncation_error`.
    """
    if m < 1:
        raise ValueError("truncation degree parameter m must be positive")
    L = V.L
    scale = max(1.0, float(np.max(np.abs(V.eval(np.linspace(-L, L, 257))))))
    if _evenness_defect(V, L) > 1e-12 * scale:
        raise ConditionViolation("potential is not even")
    cheb = Chebyshev.interpolate(V.eval, 2 * m, domain=[-L, L])
    coef = cheb.coef.copy()
    coef[1::2] = 0.0
    # drop the rounding plateau; it is amplified off the real axis
    coef[np.abs(coef) < 64 * np.finfo(float).eps * np.max(np.abs(coef))] = 0.0
    cheb = Chebyshev(coef, domain=[-L, L])
    grid = np.linspace(-L, L, validation_points)
    err = float(np.max(np.abs(cheb(grid) - V.eval(grid))))
    d = cheb.deriv()
    return Potential(eval=cheb, eval_deriv=d, strip=V.strip, poly=cheb, L=L,
                     name=f"{V.name}[m={m}]", eval_deriv2=d.deriv(), truncation_error=err)


def default_m(n):
    """Truncation parameter m = max(2, floor(log(n)^2))."""
    return max(2, int(math.floor(math.log(n) ** 2)))


def truncation_error_on_strip(V: Potential, Vm: Potential, nx=41, ny=9):
    """Max |V - V_m| on a grid of the half-size analyticity rectangle."""
    d1, d2 = V.strip
    xr = np.linspace(-2 - d1 / 2, 2 + d1 / 2, nx)
    yi = np.linspace(-d2 / 2, d2 / 2, ny)
    z = xr[:, None] + 1j * yi[None, :]
    return float(np.max(np.abs(V.eval(z) - Vm.eval(z))))


# --- equilibrium quantities -------------------------------------------------


def _chebyshev_angles(k):
    return np.pi * (np.arange(k) + 0.5) / k


def _p_quadrature(V, z, k):
    c = 2.0 * np.cos(_chebyshev_angles(k))
    z = np.asarray(z)
    diff = z[..., None] - c
    num = V.eval_deriv(z)[..., None] - V.eval_deriv(c)
    near = np.abs(diff) < 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = num / diff
    if np.any(near):
        vals = np.where(near, _second_derivative(V, np.broadcast_to(c, diff.shape)), vals)
    # integrand is even in y, so the average over [0, pi] equals (1/2pi) int_{-pi}^{pi}
    return vals.mean(axis=-1)


def _second_derivative(V, x):
    if V.eval_deriv2 is not None:
        return V.eval_deriv2(x)
    h = 1e-5
    return (V.eval_deriv(x + h) - V.eval_deriv(x - h)) / (2 * h)


def compute_P(V: Potential, z, tol=1e-12, k0=64, kmax=1 << 16):
    """P(z) = (1/2pi) int_{-pi}^{pi} (V'(z) - V'(2cos y)) / (z - 2cos y) dy.

    Gauss-Chebyshev rule with node doubling until successive values agree to `tol`.
    Accepts scalar or array `z`, real or complex.
    """
    z = np.asarray(z)
    k = k0
    prev = _p_quadrature(V, z, k)
    while k < kmax:
        k *= 2
        cur = _p_quadrature(V, z, k)
        scale = max(1.0, float(np.max(np.abs(cur))))
        if np.max(np.abs(cur - prev)) <= tol * scale:
            return cur.real if np.isrealobj(z) else cur
        prev = cur
    raise ConvergenceError(f"P(z) quadrature did not converge with {kmax} nodes")


@dataclass(frozen=True)
class EquilibriumData:
    """Chebyshev data of P on the cut, the edge constant and the minimum of P."""

    potential: Potential
    p_cheb: np.ndarray  # P(2 cos y) = sum_k p_cheb[k] cos(k y)
    gamma: float
    P2: float
    rho_min: float
    support: tuple = field(default=SUPPORT)

    def P(self, x):
        """P on the real axis; the stored cosine series is used on [-2, 2]."""
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        inside = np.abs(flat) <= 2.0
        out = np.empty_like(flat)
        y = np.arccos(flat[inside] / 2.0)
        out[inside] = np.cos(np.multiply.outer(y, np.arange(len(self.p_cheb)))) @ self.p_cheb
        if not np.all(inside):
            out[~inside] = compute_P(self.potential, flat[~inside])
        return out.reshape(x.shape)

    def rho(self, x):
        return density_rho(self, x)


def equilibrium(V: Potential, ncos=None, tol=1e-13) -> EquilibriumData:
    """Cosine-series representation of P(2 cos y) with automatic refinement."""
    k = ncos or 64
    while True:
        y = _chebyshev_angles(k)
        vals = compute_P(V, 2.0 * np.cos(y))
        # DCT-II at Chebyshev angles gives the cosine coefficients
        kk = np.arange(k)
        coef = (2.0 / k) * (np.cos(np.outer(kk, y)) @ vals)
        coef[0] *= 0.5
        scale = max(1.0, float(np.max(np.abs(coef))))
        if np.max(np.abs(coef[-max(4, k // 8):])) <= tol * scale or k >= 4096:
            break
        k *= 2
    last = np.nonzero(np.abs(coef) > 1e-13 * scale)[0]
    coef = coef[: (last[-1] + 1 if last.size else 1)]
    P2 = float(np.sum(coef))  # y = 0
    grid = np.linspace(-2.0, 2.0, 4001)
    yg = np.arccos(grid / 2.0)
    Pg = np.cos(np.multiply.outer(yg, np.arange(len(coef)))) @ coef
    rho_min = float(np.min(Pg))
    gamma = P2 ** (2.0 / 3.0) if P2 > 0 else float("nan")
    return EquilibriumData(potential=V, p_cheb=coef, gamma=gamma, P2=P2, rho_min=rho_min)


def density_rho(E: EquilibriumData, x):
    """rho(x) = P(x) sqrt(4 - x^2) / (2 pi) on (-2, 2), zero outside."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 2.0
    xi = np.where(inside, x, 0.0)
    P = E.P(xi)
    if np.any(inside & (P <= 0)):
        raise ConditionViolation("P is not positive inside the support (one-cut density fails)")
    return np.where(inside, P * np.sqrt(np.clip(4.0 - xi * xi, 0.0, None)) / (2 * np.pi), 0.0)


def edge_constant(E: EquilibriumData) -> float:
    """gamma = P(2)^(2/3)."""
    if not E.P2 > 0:
        raise ConditionViolation(f"P(2) = {E.P2} must be positive")
    return E.P2 ** (2.0 / 3.0)


def rho_mass(E: EquilibriumData, npts=200):
    """int_{-2}^{2} rho, by Gauss-Legendre in the angle x = 2 cos(theta)."""
    th, w = gauss_legendre(npts, 0.0, np.pi)
    x = 2.0 * np.cos(th)
    # dx = 2 sin(theta) dtheta, sqrt(4 - x^2) = 2 sin(theta)
    return float(np.sum(w * E.P(x) * 4.0 * np.sin(th) ** 2) / (2 * np.pi))


def log_potential(E: EquilibriumData, x, npts=800):
    """u(x) = 2 int log|mu - x| rho(mu) dmu - V(x)."""
    th, w = gauss_legendre(npts, 0.0, np.pi)
    mu = 2.0 * np.cos(th)
    dens = w * E.P(mu) * 4.0 * np.sin(th) ** 2 / (2 * np.pi)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(mu[None, :] - x[:, None]))
    logs = np.where(np.isfinite(logs), logs, 0.0)
    return 2.0 * logs @ dens - E.potential.eval(x)


@dataclass
class ConditionReport:
    """Pass/fail of each admissibility check with the measured margin."""

    checks: dict = field(default_factory=dict)

    def add(self, name, passed, margin, detail=""):
        self.checks[name] = {"passed": bool(passed), "margin": float(margin), "detail": detail}

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks.values())

    def __str__(self):
        lines = []
        for name, c in self.checks.items():
            flag = "PASS" if c["passed"] else "FAIL"
            lines.append(f"{flag} {name:<14} margin={c['margin']:.3e} {c['detail']}")
        return "\n".join(lines)


def check_conditions(V: Potential, growth_eps=0.01, delta=1e-10) -> ConditionReport:
    """Numerical screening of evenness, growth, positivity of P, normalization and C4."""
    rep = ConditionReport()
    L = V.L
    defect = _evenness_defect(V, max(L, 10.0))
    rep.add("evenness", defect <= 1e-10, -defect)

    # growth is an asymptotic requirement; checked outside the truncation window
    lam = np.linspace(L, 50.0, 2000)
    gap = V.eval(lam) - 2.0 * (1.0 + growth_eps) * np.log1p(lam)
    rep.add("growth", np.min(gap) > 0, np.min(gap), f"on |x| in [{L:.2f}, 50]")

    E = equilibrium(V)
    rep.add("P_positive", E.rho_min > delta, E.rho_min, "min P on [-2,2]")

    d1, d2 = V.strip
    xr = np.linspace(-2 - d1 / 2, 2 + d1 / 2, 25)
    yi = np.linspace(-d2 / 2, d2 / 2, 7)
    Pz = compute_P(V, (xr[:, None] + 1j * yi[None, :]).ravel())
    bound = float(np.max(np.abs(Pz)))
    rep.add("P_bounded", np.isfinite(bound) and bound < 1e8, 1e8 - bound, "sup |P| on strip")

    mass = rho_mass(E)
    rep.add("normalization", abs(mass - 1.0) <= 1e-10, 1e-10 - abs(mass - 1.0),
            f"int rho = {mass:.12f}")

    # C4: u attains its maximum only on the support (coarse grid outside)
    u_edge = log_potential(E, [2.0])[0]
    outside = np.concatenate([np.linspace(-L, -2.02, 20), np.linspace(2.02, L, 20)])
    excess = float(np.max(log_potential(E, outside)) - u_edge)
    rep.add("C4", excess < 0, -excess, "max_outside u - u(2)")
    return rep
