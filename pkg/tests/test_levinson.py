import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from jacobi_density.core import CoefficientFamily
from jacobi_density.errors import NoAdmissibleN0, PoleHit, ZeroLambda
from jacobi_density.levinson import (DiagonalSystem, chain_arrays, chain_at, chi_roots,
                                     eta_minus, eta_minus_abs2, select_N0, volterra_solve)


def test_eta_reference_value(critical_ref):
    q = chain_at(critical_ref, 100, -1.0)
    assert q.eta_minus.real == pytest.approx(0.95125, abs=5e-6)
    assert q.eta_minus.imag == pytest.approx(-0.304139, abs=5e-6)
    assert abs(q.eta_minus) ** 2 == pytest.approx(0.99737656, rel=1e-8)


@given(st.floats(0.05, 0.95), st.integers(10, 10 ** 7), st.floats(-8, -0.05))
def test_eta_modulus_closed_form(alpha, n, lam):
    # post-N0 regime: the inner square root stays near 1
    assume(abs(lam) / (4 * n ** alpha) < 0.5 and alpha / (abs(lam) * n ** (1 - alpha)) < 0.5)
    eta = eta_minus(alpha, float(n), lam)
    assert abs(eta) ** 2 == pytest.approx(eta_minus_abs2(alpha, float(n), lam), rel=1e-12)


def test_c_vanishes(critical_ref):
    assert abs(chain_at(critical_ref, 10 ** 6, -1.0).c) < 1e-2


@given(st.integers(600, 10 ** 6), st.floats(-4, -0.5))
def test_chain_algebra(n, lam):
    fam = CoefficientFamily.critical(0.5)
    q = chain_at(fam, n, lam)
    alpha = 0.5
    assert q.g_plus == pytest.approx(q.sqrt_chi + alpha / (4 * n), rel=1e-15, abs=1e-18)
    assert q.g_minus == pytest.approx(-q.sqrt_chi + alpha / (4 * n), rel=1e-15, abs=1e-18)
    prev = chain_at(fam, n - 1, lam).d
    assert q.h_plus == pytest.approx(prev * (1 + q.g_plus), rel=1e-15)
    assert q.h_minus == pytest.approx(prev * (1 + q.g_minus), rel=1e-15)
    assert q.sqrt_chi_direct == pytest.approx(q.sqrt_chi, rel=1e-12)
    assert q.sqrt_chi.real >= -1e-12
    lhs = q.h_plus * q.h_minus
    rhs = prev ** 2 * (1 + alpha / (2 * n) + alpha ** 2 / (16 * n ** 2) - q.chi)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_sqrt_chi_branch_coherence(critical_ref):
    lam = np.linspace(-4, -0.5, 36)
    for n in (512, 4096, 1 << 16):
        s = chain_arrays(critical_ref, float(n), lam).sqrt_chi
        assert np.max(np.abs(np.angle(s[1:] / s[:-1]))) < math.pi / 2
    n = np.arange(512, 5000, dtype=float)
    s = chain_arrays(critical_ref, n, -1.0).sqrt_chi
    assert np.max(np.abs(np.angle(s[1:] / s[:-1]))) < math.pi / 2


def test_chi_roots():
    lp, lm, pole = chi_roots(0.5, 100)
    assert lp == pytest.approx(20 * (-1 + math.sqrt(1 - 0.005)))
    assert lm == pytest.approx(20 * (-1 - math.sqrt(1 - 0.005)))
    assert pole == -20


def test_pole_hit(critical_ref):
    with pytest.raises(PoleHit):
        chain_at(critical_ref, 100, -20.0)


def test_select_N0(critical_ref):
    n0 = select_N0(critical_ref, (-4.0, -0.5))
    assert n0 >= 2
    assert select_N0(critical_ref, (-4.0, -0.25)) >= n0
    lam = np.linspace(-4, -0.5, 64)
    assert np.min(np.abs(eta_minus(0.5, float(n0), lam))) >= 0.5
    assert select_N0(critical_ref, (-4.0, -0.5), n_boundary=128, n_interior=64) == n0
    with pytest.raises(NoAdmissibleN0):
        select_N0(critical_ref, (-1.0, 1.0))


def test_select_N0_rectangle(critical_ref):
    assert select_N0(critical_ref, (-4.0, -0.5, 0.0, 0.5)) >= 2


def test_volterra_zero_remainder():
    sys = DiagonalSystem(np.full(200, 1.3 + 0.2j), np.zeros((200, 2, 2)))
    sol = volterra_solve(sys, 200)
    assert np.array_equal(sol.values, np.tile([0, 1], (201, 1)).astype(complex))


def test_volterra_single_site():
    rho, k0 = 0.37 - 0.1j, 40
    rem = np.zeros((100, 2, 2), dtype=complex)
    rem[k0 - 1, 0, 1] = rho           # start = 1: entry k0 - 1 is R_{k0}
    sol = volterra_solve(DiagonalSystem(np.ones(100), rem, start=1), 100)
    for n in range(1, 102):
        expect = np.array([-rho, 1]) if n <= k0 else np.array([0, 1])
        assert np.array_equal(sol.at(n), expect)


def test_volterra_zero_lambda():
    with pytest.raises(ZeroLambda):
        volterra_solve(DiagonalSystem(np.array([1, 0, 1]), np.zeros((3, 2, 2))), 3)


def _random_system(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(20, 400))
    k = np.arange(1, K + 1)
    phase = rng.uniform(-0.2, 0.2, K)
    mod = np.exp(rng.normal(0, 0.3, K) / k)        # block products stay bounded
    lam = mod * np.exp(1j * phase)
    decay = rng.uniform(1.2, 3.0)
    scale = rng.uniform(0.01, 0.5)
    rem = scale * (rng.normal(size=(K, 2, 2)) + 1j * rng.normal(size=(K, 2, 2)))
    rem /= (k ** decay)[:, None, None]
    return DiagonalSystem(lam, rem)


@pytest.mark.parametrize("seed", range(100))
def test_volterra_tail_bound(seed):
    sys = _random_system(seed)
    sol = volterra_solve(sys, sys.start + sys.lam_seq.size - 1)
    err = np.max(np.abs(sol.values - np.array([0, 1])), axis=1)
    assert np.all(err <= sol.tail_bound * (1 + 1e-12) + 1e-15)


def test_volterra_truncation_convergence():
    sys = _random_system(7)
    K = sys.lam_seq.size
    full = volterra_solve(sys, K)
    half = volterra_solve(sys, K // 2)
    diff = np.max(np.abs(full.values[:K // 2] - half.values[:K // 2]), axis=1)
    assert np.all(diff <= half.tail_bound[:K // 2] + full.tail_bound[:K // 2] + 1e-15)
