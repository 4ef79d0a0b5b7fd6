import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erf

from rmtedge.errors import FormatError
from rmtedge.orthopoly import build_recurrence, psi_table
from rmtedge.potential import builtin
from rmtedge.quadrature import gauss_legendre
from rmtedge.skewkernel import (NATIVE, KernelBundle, bundle_rows, build_moments,
                                christoffel_darboux_defect, edge_kernels, epsilon_apply,
                                kernel_K, kernel_K_via_VJ, kernel_S, lemma_decomposition,
                                load_bundle, save_bundle, save_bundle_csv, scale_edge,
                                vprime_of_J, vs_sum)

from conftest import context


@given(st.floats(-2.4, 2.4))
def test_epsilon_apply_gaussian(x):
    L = 2.5
    got = epsilon_apply(lambda t: np.exp(-t * t), [x], L)[0]
    c = 0.5 * np.sqrt(np.pi)
    exact = 0.5 * c * ((erf(x) + erf(L)) - (erf(L) - erf(x)))
    assert abs(got - exact) < 1e-13


def test_bank_eps_matches_split_rule(quartic64):
    T, bank, *_ = quartic64
    x = np.array([-2.2, -0.4, 0.0, 1.3, 2.4])
    ref = np.array([epsilon_apply(lambda t, l=l: psi_table(T, t.ravel(), l)[l].reshape(t.shape), x, T.L)
                    for l in (0, 7, 40, 64)])
    assert np.max(np.abs(bank.eps(x)[[0, 7, 40, 64]] - ref)) < 1e-12
    assert bank.resolution <= 1e-14


@pytest.mark.parametrize("ctx", ["gauss64", "quartic64"])
def test_moment_matrix_invariants(ctx, request):
    T, bank, mom, _ = request.getfixturevalue(ctx)
    n = T.n
    assert np.array_equal(mom.M, -mom.M.T)
    assert mom.diagnostics["skew_defect"] < 1e-12
    assert mom.diagnostics["checkerboard_max"] < 1e-12
    assert np.max(np.abs(mom.Minv @ mom.M - np.eye(n))) < 1e-8
    assert mom.cond < 1e12


def test_odd_n_rejected():
    with pytest.raises(ValueError):
        build_moments(build_recurrence(builtin("gaussian"), 9))


def test_reproducing_property_and_trace(quartic64):
    T = quartic64[0]
    z, w = gauss_legendre(400, -T.L, T.L)
    x = np.array([-1.5, 0.3, 2.05])
    Kxz = kernel_K(T, x, z)
    assert np.max(np.abs((Kxz * w) @ Kxz.T - kernel_K(T, x))) < 1e-8
    assert abs(np.sum(w * np.diag(kernel_K(T, z))) - T.n) < 1e-8


def test_christoffel_darboux(quartic64):
    T = quartic64[0]
    x = np.linspace(-2.3, 2.3, 7)
    assert christoffel_darboux_defect(T, x, x + 0.013) < 1e-12


def test_vprime_of_J_matches_quadrature(quartic64):
    T = quartic64[0]
    W = vprime_of_J(T)
    x, w = gauss_legendre(600, -T.L, T.L)
    P = psi_table(T, x, 60)
    G = (P * (w * T.potential.eval_deriv(x))) @ P.T
    assert np.max(np.abs(W[:61, :61] - G)) < 1e-12


def test_vs_sum_tends_to_P2():
    d = [abs(vs_sum(context("quartic12", n)[0]) - 2.0) for n in (64, 128)]
    assert d[1] < d[0] < 1e-3


def test_VJ_representation_of_K(quartic64):
    T, _, _, gamma = quartic64
    lam = 2.0 + np.linspace(-2, 3, 6) / (gamma * T.n ** (2 / 3))
    K1 = kernel_K(T, lam)
    K2 = kernel_K_via_VJ(T, lam)
    assert np.max(np.abs(K1 - K2)) < 1e-8 * np.max(np.abs(K1))


def test_kernel_entry_relations(quartic64):
    T, bank, mom, _ = quartic64
    x = np.array([-1.0, 0.5, 1.9])
    y = np.array([-0.7, 1.2, 2.1])
    B = kernel_S(T, mom, x, y, bank)
    assert np.max(np.abs(B.I + kernel_S(T, mom, y, x, bank).I.T)) < 1e-10
    # D = -d/dy S
    h = 1e-5
    fd = (kernel_S(T, mom, x, y + h, bank).S - kernel_S(T, mom, x, y - h, bank).S) / (2 * h)
    assert np.max(np.abs(B.D + fd)) < 1e-5 * np.max(np.abs(B.D))
    # I = eps_x S
    f = lambda t: kernel_S(T, mom, t.ravel(), y, bank, with_dK=False).S[:, 1].reshape(t.shape)
    assert np.max(np.abs(epsilon_apply(f, x, T.L) - B.I[:, 1])) < 1e-9


def test_gaussian_lemma_is_exact(gauss64):
    T, bank, mom, gamma = gauss64
    r = lemma_decomposition(T, np.linspace(-2, 4, 9), gamma=gamma, bank=bank, moments=mom)
    assert r["sup_S"] < 1e-8 and r["sup_D"] < 1e-8


def test_edge_bundle_scaling(quartic64):
    T, bank, mom, gamma = quartic64
    x = np.linspace(-2, 4, 5)
    B = edge_kernels(T, x, gamma=gamma, moments=mom, bank=bank)
    c = gamma * T.n ** (2 / 3)
    lam = 2 + x / c
    N = kernel_S(T, mom, lam, bank=bank)
    assert np.allclose(B.grid_x, x) and B.is_edge
    assert np.max(np.abs(B.S * c - N.S)) < 1e-10 and np.max(np.abs(B.D * c**2 - N.D)) < 1e-8
    assert np.array_equal(B.I, N.I)
    with pytest.raises(ValueError):
        scale_edge(B, gamma, T.n)


@settings(max_examples=25)
@given(st.integers(1, 6), st.integers(1, 6), st.booleans())
def test_bundle_roundtrip(tmp_path_factory, gx, gy, edge):
    rng = np.random.default_rng(gx * 10 + gy)
    B = KernelBundle(grid_x=rng.standard_normal(gx), grid_y=rng.standard_normal(gy),
                     K=rng.standard_normal((gx, gy)), S=rng.standard_normal((gx, gy)),
                     scale=("edge", 1.5, 64) if edge else NATIVE)
    path = tmp_path_factory.mktemp("b") / "k.bin"
    save_bundle(B, path)
    C = load_bundle(path)
    assert np.array_equal(C.K, B.K) and np.array_equal(C.S, B.S) and C.D is None
    assert C.scale == B.scale


def test_bundle_format_errors(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"RMTX" + bytes(40))
    with pytest.raises(FormatError):
        load_bundle(path)
    path.write_bytes(b"RM")
    with pytest.raises(FormatError):
        load_bundle(path)


def test_bundle_csv(tmp_path):
    B = KernelBundle(grid_x=np.arange(2.0), grid_y=np.arange(3.0), K=np.ones((2, 3)))
    names, rows = bundle_rows(B)
    assert names == ["x", "y", "K"] and rows.shape == (6, 3)
    save_bundle_csv(B, tmp_path / "k.csv")
    assert (tmp_path / "k.csv").read_text().splitlines()[0] == "x,y,K"
