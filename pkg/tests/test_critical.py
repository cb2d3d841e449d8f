import math

import numpy as np
import pytest

from jacobi_density import critical
from jacobi_density.core import CoefficientFamily, Perturbation, coeff_arrays, orthopoly, \
    recurrence_residual
from jacobi_density.errors import NoAdmissibleIndices, SeedDegenerate
from jacobi_density.levinson import chi_roots, eta_minus
from jacobi_density.stabilized import resolvent_density

N0 = 512


@pytest.fixture(scope="module")
def trace_ref(critical_ref):
    return critical.u_minus(critical_ref, -1.0, 1 << 16, 1 << 16, N0=N0)


def test_reference_n0(critical_ref):
    assert critical.resolve_N0(critical_ref) == N0


def test_u_minus_satisfies_recurrence(critical_ref, trace_ref):
    a, b = coeff_arrays(critical_ref, 40_001)
    r = recurrence_residual(a, b, -1.0, trace_ref.values(), np.arange(2, 40_000))
    assert np.max(r) <= 1e-10


def test_u_minus_amplitude_decay(critical_ref, trace_ref):
    # |u^-_n| ~ H n^(-alpha/4)
    amp = [n ** 0.125 * abs(trace_ref.values(n)) for n in (10_000, 40_000)]
    assert amp[1] == pytest.approx(amp[0], rel=1e-2)


def test_u_minus_seed_doubling(critical_ref):
    # u_2 relative to its extrapolated limit improves as the seed doubles
    seeds = (1 << 14, 1 << 15, 1 << 16, 1 << 17)
    vals = [complex(critical.u_minus(critical_ref, -1.0, s, s, N0=N0).values(2)) for s in seeds]
    ref = critical.aitken(vals[-3:]).value
    errs = [abs(v - ref) for v in vals[:-1]]
    assert errs[0] > errs[1] > errs[2]


def test_u_minus_seed_too_small(critical_ref):
    with pytest.raises(ValueError):
        critical.u_minus(critical_ref, -1.0, 4000, 4000, N0=N0)


def test_u_minus_seed_degenerate(critical_ref):
    lam = float(chi_roots(0.5, 16384.0)[0])
    with pytest.raises(SeedDegenerate):
        critical.u_minus(critical_ref, lam, 16384, 16384, N0=N0)


def test_conjugate_trace(critical_ref, trace_ref):
    lam = -1.0 + 1e-3j
    t = critical.u_minus(critical_ref, lam, 1 << 14, 1 << 14, N0=N0)
    t2 = critical.u_minus(critical_ref, np.conj(lam), 1 << 14, 1 << 14, N0=N0)
    n = np.arange(0, 100)
    np.testing.assert_allclose(t.conjugate().values(n), t2.values(n), rtol=1e-10)


def test_H_extrapolation_against_raw(critical_ref):
    h = critical.H_of(critical_ref, -1.0, N0)
    raw = critical.raw_H(critical_ref, -1.0, N0, 10_000_000)
    assert abs(h.H - raw) / h.H < 2e-3
    r1 = critical.raw_H(critical_ref, -1.0, N0, 1_000_000)
    r2 = critical.raw_H(critical_ref, -1.0, N0, 2_000_000)
    assert abs(r2 - r1) / r1 < 1e-3
    assert h.uncertainty < 1e-3 * h.H


def test_H_n0_shift(critical_ref):
    lam = -2.0
    h0 = critical.H_of(critical_ref, lam, N0).H
    h1 = critical.H_of(critical_ref, lam, N0 + 1).H
    eta = abs(eta_minus(0.5, float(N0), lam))
    assert h1 == pytest.approx(h0 / eta, rel=1e-12)


def test_u0_linearity_and_p_trace(critical_ref, trace_ref):
    u0 = critical.u0_minus_of(trace_ref, critical_ref)
    assert u0 == pytest.approx(complex(trace_ref.values(0)), rel=1e-12)
    scaled = critical.SolutionTrace(trace_ref.lam, 0, trace_ref.log_abs + math.log(3.0),
                                    trace_ref.phase + 0.7, trace_ref.seed_index,
                                    trace_ref.method)
    assert critical.u0_minus_of(scaled, critical_ref) == pytest.approx(
        3 * np.exp(0.7j) * u0, rel=1e-12)
    # the orthogonal polynomials satisfy the boundary condition: P_0 = 0
    P = orthopoly(critical_ref, -1.0, 10).P(np.arange(1, 11)).astype(complex)
    ptrace = critical.SolutionTrace(-1.0, 0, np.log(np.abs(np.r_[1.0, P])),
                                    np.angle(np.r_[1.0, P]), 0, critical.Method.BACKWARD)
    assert abs(critical.u0_minus_of(ptrace, critical_ref)) < 1e-13


@pytest.fixture(scope="module")
def rho_ref(critical_ref):
    return critical.rho_critical(critical_ref, -1.0)


def test_rho_against_oracle(critical_ref, rho_ref):
    oracle = resolvent_density(critical_ref, -1.0)
    assert abs(rho_ref.value - oracle.value) / oracle.value < 1e-2


def test_rho_forms_agree(rho_ref):
    assert rho_ref.form_psi == pytest.approx(rho_ref.form_u0, rel=1e-14)
    inp = rho_ref.inputs
    assert inp.psi == pytest.approx(inp.u0_minus / (2j * inp.H ** 2), rel=1e-14)
    assert rho_ref.value > 0
    assert rho_ref.N0 == N0


def test_rho_outside_window(critical_ref):
    with pytest.raises(ValueError):
        critical.rho_critical(critical_ref, -0.1)
    with pytest.raises(ValueError):
        critical.rho_critical(critical_ref, -1.0, window=(-4.0, -0.01))


def test_rho_requires_critical(hermite):
    with pytest.raises(ValueError):
        critical.rho_critical(hermite, -1.0)


# ---------------------------------------------------------------------------
# subsequence

def test_subsequence_unperturbed(critical_ref):
    assert critical.pick_subsequence(critical_ref, 4, 32) == [32, 64, 128, 256]


def test_subsequence_fast_power():
    fam = CoefficientFamily.critical(0.5, Perturbation.power(1.0, 1.0))
    assert critical.pick_subsequence(fam, 4, 32) == [32, 64, 128, 256]


def test_subsequence_scan():
    fam = CoefficientFamily.critical(0.5, Perturbation.power(1e-3, 0.3))
    idx = critical.pick_subsequence(fam, 4, 32)
    assert all(critical.subsequence_ok(fam, idx))
    assert idx == sorted(set(idx))


def test_subsequence_table_skips():
    fam = CoefficientFamily.critical(0.5, Perturbation.from_table([0.0] * 63 + [5.0] * 3))
    idx = critical.pick_subsequence(fam, 4, 32)
    assert idx == [32, 67, 128, 256]
    assert all(critical.subsequence_ok(fam, idx))


def test_subsequence_none():
    fam = CoefficientFamily.critical(0.5, Perturbation.power(1.0, 0.3))
    with pytest.raises(NoAdmissibleIndices):
        critical.pick_subsequence(fam, 4, 32)


# ---------------------------------------------------------------------------
# identities

@pytest.fixture(scope="module")
def wr_ref(critical_ref):
    return critical.wronskian_identity_check(critical_ref, -1.0)


def test_wronskian_constant(wr_ref):
    assert max(wr_ref.constancy) <= 1e-10


def test_wronskian_identity(wr_ref):
    assert wr_ref.extrapolated_deviation <= 1e-3
    assert wr_ref.decreasing
    assert wr_ref.sign_ok


def test_wronskian_corrupt_seed(critical_ref):
    w = critical.wronskian_identity_check(critical_ref, -1.0, seed_factor=1.01)
    assert max(w.constancy) <= 1e-10
    assert w.extrapolated_deviation > 1e-3


def test_decomposition(critical_ref):
    e4 = critical.decomposition_check(critical_ref, -1.0).max_error
    e3 = critical.decomposition_check(critical_ref, -1.0, (1000, 2000)).max_error
    assert e4 < 5e-2
    assert e4 < e3


def test_decomposition_psi_zero(critical_ref):
    # dropping the u^+ term leaves an error of the size of the envelope
    r = critical.decomposition_check(critical_ref, -1.0, (10_000, 10_200), psi=0.0)
    assert 0.5 < r.max_error < 1.5


def test_chain_volterra_agrees_with_backward(critical_ref):
    ns = 1 << 14
    tb = critical.u_minus(critical_ref, -1.5, ns, ns, N0=N0)
    tc = critical.u_minus(critical_ref, -1.5, ns, ns, N0=N0,
                          method=critical.Method.CHAIN_VOLTERRA, n_chain=4 * ns)
    n = np.arange(N0, ns + 1)
    rb = tb.values(n) / tb.values(ns)
    rc = tc.values(n) / tc.values(ns)
    diff = np.max(np.abs(rb - rc) / np.abs(rb))
    assert diff <= tc.volterra.tail_bound[ns - N0]


def test_y_remainder_closed_form(critical_ref):
    system, _ = critical.chain_system(critical_ref, -1.0, N0, N0 + 200)
    n = np.arange(N0, N0 + 201, dtype=float)
    closed = critical.y_remainder_closed_form(critical_ref, -1.0, n)
    from jacobi_density.levinson import chain_arrays
    ch = chain_arrays(critical_ref, n, -1.0)
    sp, sm = np.sqrt(1 + ch.g_plus), np.sqrt(1 + ch.g_minus)
    np.testing.assert_allclose(system.rem_seq, closed / (sp * sm)[:, None, None],
                               rtol=1e-8, atol=1e-14)


def test_n0_invariance(critical_ref):
    vals = []
    for n0 in (N0, N0 + 1, N0 + 7):
        h = critical.H_of(critical_ref, -2.0, n0).H
        tr = critical.u_minus(critical_ref, -2.0, 1 << 14, 1 << 14, N0=n0)
        vals.append(h ** 2 / abs(tr.values(0)) ** 2)
    np.testing.assert_allclose(vals, vals[0], rtol=1e-12)


def test_perturbed_against_oracle(critical_perturbed):
    r = critical.rho_critical(critical_perturbed, -2.0)
    o = resolvent_density(critical_perturbed, -2.0)
    assert abs(r.value - o.value) / o.value < 3e-2
