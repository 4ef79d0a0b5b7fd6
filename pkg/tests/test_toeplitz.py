import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rmtedge.errors import ConditionViolation
from rmtedge.potential import Potential, builtin, equilibrium
from rmtedge.toeplitz_rep import (band_defect, build_calV, build_toeplitz, convolution_defect,
                                  decay_fit, fourier_coefficients, fourier_V_identity,
                                  reconstruct_Minv, residual_rows, scalar_identity_check)

from conftest import context


@given(st.floats(0.05, 0.8))
def test_fourier_coefficients_poisson_kernel(r):
    c = fourier_coefficients(lambda y: 1.0 / (1 - 2 * r * np.cos(y) + r * r))
    d = np.arange(len(c))
    assert np.max(np.abs(c - r**d / (1 - r * r))) < 1e-13


def test_quartic_symbol_coefficients():
    pack = build_toeplitz(equilibrium(builtin("quartic12")), 32)
    # P(2 cos y) = 4/3 + (2/3) cos 2y; 1/(a + b cos t) = sum_k (-rho)^|k| e^{ikt} / sqrt(a^2 - b^2)
    assert np.allclose(pack.P[:3], [4 / 3, 0, 1 / 3], atol=1e-14)
    a, b = 4 / 3, 2 / 3
    rho = (a - math.sqrt(a * a - b * b)) / b
    k = np.arange(10)
    assert np.max(np.abs(pack.R[0:20:2] - (-rho) ** k / math.sqrt(a * a - b * b))) < 1e-13
    assert np.max(np.abs(pack.R[1:20:2])) < 1e-14
    assert abs(decay_fit(pack.R) - (-math.log(rho) / 2)) < 1e-3


def test_gaussian_pack_is_trivial():
    pack = build_toeplitz(equilibrium(builtin("gaussian")), 16)
    assert np.allclose(pack.Rinv_section, np.eye(16), atol=1e-14)
    e = np.zeros(16)
    e[-1] = 1
    assert np.allclose(pack.a, e, atol=1e-14) and np.max(np.abs(pack.b)) < 1e-14
    assert pack.m == 1


@pytest.mark.parametrize("name", ["gaussian", "quartic12", "quartic20"])
def test_band_and_convolution(name):
    E = equilibrium(builtin(name))
    pack = build_toeplitz(E, 64)
    assert band_defect(pack.P_matrix(64), pack.band) < 1e-14
    assert convolution_defect(pack) < 1e-12
    assert decay_fit(pack.R) > 0


@pytest.mark.parametrize("name", ["gaussian", "quartic12", "quartic20"])
def test_symbol_identity(name):
    r = fourier_V_identity(equilibrium(builtin(name)))
    assert r["identity_defect"] < 1e-10 and r["slope_defect"] < 1e-10


def test_scalar_identity():
    for n in (32, 64):
        r = scalar_identity_check(build_toeplitz(equilibrium(builtin("quartic12")), n))
        assert r["Du_defect"] == 0.0 and r["Pu_defect"] < 1e-14
        assert r["difference"] <= r["scale"]


def test_reconstruction_residual_shrinks():
    reports = []
    for n in (64, 128):
        T, _, mom, _ = context("quartic12", n)
        pack = build_toeplitz(equilibrium(T.potential), n)
        approx, rep = reconstruct_Minv(pack, build_calV(T), mom.Minv)
        # Minv is skew, so the skew defect of the assembly is at most twice its deviation
        assert rep["skew_defect"] <= 2 * rep["residual"] + 1e-14
        reports.append(rep)
    assert reports[1]["residual"] < reports[0]["residual"]
    assert reports[1]["normalized"] <= reports[0]["normalized"]
    rows = residual_rows(reports)
    assert [r[0] for r in rows] == [64, 128]


def test_calV_is_signed_and_banded(quartic64):
    T = quartic64[0]
    Vc = build_calV(T, 40, 40)
    # V' = x^3/3 couples psi_j, psi_l only for |j - l| in {1, 3}
    assert band_defect(Vc, 3) < 1e-13
    # sign(l - j) times a symmetric matrix is skew
    assert np.max(np.abs(Vc + Vc.T)) < 1e-13


def test_nonpositive_symbol_rejected():
    V = Potential.from_even_coeffs([0.0, -1.0, 0.25])
    with pytest.raises(ConditionViolation):
        build_toeplitz(equilibrium(V), 16)
