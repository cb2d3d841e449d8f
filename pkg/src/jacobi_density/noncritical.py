r"""Density of the non-critical family ``a_n = n^beta``, ``b_n = 2 d a_n`` with ``|d| < 1``.

.. math::

    \rho'(\lambda) = \frac{\sqrt{1-d^2}\,M^2(\lambda)}{\pi |u^-_0(\lambda)|^2},
    \qquad M(\lambda) = \lim_{n\to\infty}\sqrt{a_n}\prod_{l=2}^{n}|\mu^-_l(\lambda)|,

with :math:`\mu^\pm_n` the eigenvalues of the transfer matrix.  Once the
row is elliptic :math:`|\mu^-_l|^2 = a_{l-1}/a_l`, so the product telescopes
and :math:`M` is a finite product.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import DEFAULT_SCALE_THRESHOLD, CoefficientFamily, Kind, coeff_arrays, coeff_values
from .critical import SolutionTrace, Method
from .errors import CriticalParameter, NoStabilization, SeedDegenerate
from .extrapolate import aitken
from .stabilized import DensityResult, Route

DEFAULT_SEEDS = (1 << 12, 1 << 14, 1 << 16)
STABILIZATION_CEILING = 1 << 24


class Regime(str, enum.Enum):
    ELLIPTIC = "elliptic"
    HYPERBOLIC = "hyperbolic"
    PARABOLIC = "parabolic"


@dataclass(frozen=True)
class EllipticInfo:
    n: int
    lambda_minus_edge: float
    lambda_plus_edge: float
    regime: Regime


@dataclass(frozen=True)
class NonCriticalInputs:
    M: float
    z_limit: complex
    u0_minus: complex
    psi: complex
    stabilization_index: int


@dataclass(frozen=True)
class NonCriticalDensityResult(DensityResult):
    inputs: NonCriticalInputs | None = None
    form_psi: float = float("nan")
    seeds: tuple[int, ...] = ()
    per_seed: tuple[float, ...] = ()


def check_parameter(family: CoefficientFamily):
    if family.kind is not Kind.NONCRITICAL:
        raise ValueError("expected a non-critical family")
    if abs(family.d) >= 1:
        raise CriticalParameter(
            f"|d| = {abs(family.d)} >= 1: the non-critical formula does not apply "
            "(d = -1 corresponds to the critical family)")


def _ratio_w(family, n, lam):
    n = np.asarray(n, dtype=float)
    a_prev, _ = coeff_values(family, n - 1)
    a, b = coeff_values(family, n)
    return a_prev / a, (lam - b) / (2 * a)


def mu_pm_arrays(family: CoefficientFamily, n, lam):
    """Vectorized ``(mu+, mu-)`` for rows ``n >= 2``."""
    r, w = _ratio_w(family, n, lam)
    w = np.asarray(w, dtype=complex)
    s = np.sqrt(w * w - r)
    r1, r2 = w + s, w - s
    big_first = (np.abs(r1) > np.abs(r2)) | ((np.abs(r1) == np.abs(r2)) & (r1.imag >= r2.imag))
    big = np.where(big_first, r1, r2)
    small = np.where(big_first, r2, r1)
    # the small root from the product avoids cancellation off the elliptic zone
    elliptic = (np.abs(np.imag(w)) == 0) & (np.real(w) ** 2 < r)
    small = np.where(elliptic | (big == 0), small, r / np.where(big == 0, 1, big))
    return big, small


def mu_pm(family: CoefficientFamily, n: int, lam: complex) -> tuple[complex, complex]:
    """Eigenvalues of the transfer matrix at row ``n``; ``mu-`` has the smaller modulus."""
    if n < 2:
        raise ValueError("n must be >= 2")
    p, m = mu_pm_arrays(family, np.array([n]), complex(lam))
    return complex(p[0]), complex(m[0])


def elliptic_info(family: CoefficientFamily, n: int, lam: float) -> EllipticInfo:
    a_prev, _ = coeff_values(family, np.array([float(n - 1)]))
    a, b = coeff_values(family, np.array([float(n)]))
    half = 2 * math.sqrt(a_prev[0] * a[0])
    lo, hi = float(b[0] - half), float(b[0] + half)
    if lo < lam < hi:
        regime = Regime.ELLIPTIC
    elif lam == lo or lam == hi:
        regime = Regime.PARABOLIC
    else:
        regime = Regime.HYPERBOLIC
    return EllipticInfo(n, lo, hi, regime)


def _elliptic_mask(family, n, lam):
    a_prev, _ = coeff_values(family, n - 1)
    a, b = coeff_values(family, n)
    return np.abs(lam - b) < 2 * np.sqrt(a_prev * a)


def stabilization_index(family: CoefficientFamily, lam: float,
                        ceiling: int = STABILIZATION_CEILING) -> int:
    """First row from which every sampled row up to the verification horizon is elliptic."""
    horizon = 1024
    while True:
        n = np.arange(2, horizon + 1, dtype=float)
        bad = np.flatnonzero(~_elliptic_mask(family, n, lam))
        L = 2 if bad.size == 0 else int(n[bad[-1]]) + 1
        if 16 * L <= horizon:
            return L
        if horizon >= ceiling:
            raise NoStabilization(f"no elliptic onset below {ceiling} at lambda={lam!r}")
        horizon *= 4


def _log_partial(family, lam, n_end: int) -> float:
    """``log(sqrt(a_n) prod_{l=2}^{n} |mu-_l|)`` at ``n = n_end``."""
    n = np.arange(2, n_end + 1, dtype=float)
    _, m = mu_pm_arrays(family, n, lam)
    a, _ = coeff_values(family, np.array([float(n_end)]))
    return 0.5 * math.log(a[0]) + math.fsum(np.log(np.abs(m)))


@dataclass(frozen=True)
class MValue:
    M: float
    L: int
    check_rel: float


def M_of(family: CoefficientFamily, lam: float, check: bool = True) -> MValue:
    """``M(lam)`` as the finite product ``sqrt(a_{L-1}) prod_{l=2}^{L-1} |mu-_l|``.

    With ``check`` the partial products at ``L`` and ``10 L`` are computed
    directly and must agree to 1e-14 relative.
    """
    check_parameter(family)
    lam = float(lam)
    L = stabilization_index(family, lam)
    if L > 2:
        n = np.arange(2, L, dtype=float)
        _, m = mu_pm_arrays(family, n, lam)
        log_prod = math.fsum(np.log(np.abs(m)))
    else:
        log_prod = 0.0
    a_last, _ = coeff_values(family, np.array([float(L - 1)]))
    M = math.exp(0.5 * math.log(a_last[0]) + log_prod)
    rel = 0.0
    if check:
        p1, p2 = _log_partial(family, lam, L), _log_partial(family, lam, 10 * L)
        rel = max(abs(math.expm1(p1 - math.log(M))), abs(math.expm1(p2 - math.log(M))))
        if rel > 1e-14:
            raise NoStabilization(f"partial products drift by {rel:.2e} beyond L={L}")
    return MValue(M, L, rel)


def z_limit(d: float) -> complex:
    return complex(-d, -math.sqrt(1 - d * d))


def u_minus_noncritical(family: CoefficientFamily, lam: complex, n_max: int, N_seed: int,
                        seed_factor: complex = 1.0) -> SolutionTrace:
    """``u^-`` on rows ``0 .. n_max`` seeded with ``prod mu- * (1, mu-_{N_seed})``."""
    check_parameter(family)
    if n_max < N_seed:
        raise ValueError("n_max must be >= N_seed")
    mp, mm = mu_pm(family, N_seed, lam)
    if abs(mp - mm) < 1e-8:
        raise SeedDegenerate(f"mu+ and mu- coincide at N_seed={N_seed}, lambda={lam!r}")
    _, mus = mu_pm_arrays(family, np.arange(2, N_seed, dtype=float), complex(lam))
    logs_mu = np.log(mus)
    base = complex(np.sum(logs_mu.real), np.sum(logs_mu.imag))
    a, b = coeff_arrays(family, n_max + 1)
    lam_c = complex(lam)
    u_prev, u_cur = 1.0 + 0j, mm * seed_factor
    lo_m, lo_l = _kernels.backward(lam_c, a, b, u_prev, u_cur, N_seed, DEFAULT_SCALE_THRESHOLD)
    hi_m, hi_l = _kernels.forward(lam_c, a, b, u_prev, u_cur, N_seed, n_max,
                                  DEFAULT_SCALE_THRESHOLD)
    mant = np.concatenate([lo_m, hi_m[N_seed + 1:]])
    logs = np.concatenate([lo_l, hi_l[N_seed + 1:]])
    return SolutionTrace.from_scaled(lam, 0, mant, logs, base, seed_index=N_seed,
                                     method=Method.BACKWARD)


def rho_noncritical(family: CoefficientFamily, lam: float, seeds=DEFAULT_SEEDS,
                    lambda_cap: float | None = None) -> NonCriticalDensityResult:
    """Non-critical density at real ``lam``, extrapolated over the seed schedule."""
    check_parameter(family)
    lam = float(lam)
    if lambda_cap is not None and abs(lam) > lambda_cap:
        raise ValueError(f"|lambda| = {abs(lam)} exceeds the configured cap {lambda_cap}")
    mv = M_of(family, lam)
    d = family.d
    s = math.sqrt(1 - d * d)
    seeds = tuple(int(x) for x in seeds)
    if seeds[0] <= mv.L:
        raise ValueError(f"seeds must lie beyond the stabilization index {mv.L}")
    u0s = [complex(u_minus_noncritical(family, lam, ns, ns).values(0)) for ns in seeds]
    per_seed = [s * mv.M ** 2 / (math.pi * abs(u0) ** 2) for u0 in u0s]
    ex = aitken(per_seed)
    u0 = u0s[-1]
    psi = u0 / (2j * s * mv.M ** 2)
    form_psi = 1.0 / (4 * math.pi * s * abs(psi) ** 2 * mv.M ** 2)
    inputs = NonCriticalInputs(mv.M, z_limit(d), u0, psi, mv.L)
    return NonCriticalDensityResult(lam, float(np.real(ex.value)), Route.NONCRITICAL,
                                    float(ex.uncertainty), inputs=inputs, form_psi=form_psi,
                                    seeds=seeds, per_seed=tuple(per_seed))


@dataclass
class NonCriticalWronskianReport:
    lam: float
    target: complex
    seeds: tuple[int, ...]
    values: list[complex]
    deviations: list[float]
    extrapolated_deviation: float
    decreasing: bool


def wronskian_check(family: CoefficientFamily, lam: float, seeds=DEFAULT_SEEDS,
                    n_ref: int = 10) -> NonCriticalWronskianReport:
    """``W{u+, u-}`` against ``-2 i sqrt(1-d^2) M^2`` along the seed schedule."""
    check_parameter(family)
    lam = float(lam)
    mv = M_of(family, lam)
    target = -2j * math.sqrt(1 - family.d ** 2) * mv.M ** 2
    vals, devs = [], []
    for ns in seeds:
        tr = u_minus_noncritical(family, lam, int(ns), int(ns))
        u = tr.values(np.array([n_ref, n_ref + 1]))
        a, _ = coeff_values(family, np.array([float(n_ref)]))
        w = a[0] * (np.conj(u[0]) * u[1] - np.conj(u[1]) * u[0])
        vals.append(complex(w))
        devs.append(abs(w - target) / abs(target))
    ex = aitken(vals)
    return NonCriticalWronskianReport(
        lam, target, tuple(int(s) for s in seeds), vals, devs,
        float(abs(ex.value - target) / abs(target)),
        all(d1 < d0 for d0, d1 in zip(devs, devs[1:])))


@dataclass
class NonCriticalDecompositionReport:
    lam: float
    n_window: tuple[int, int]
    max_error: float
    psi: complex


def decomposition_check(family: CoefficientFamily, lam: float, n_window=(10_000, 20_000),
                        N_seed: int = DEFAULT_SEEDS[-1],
                        psi: complex | None = None) -> NonCriticalDecompositionReport:
    """Max over ``n_window`` of ``|P_n - 2 Re(Psi u+_n)| / (2 |Psi| M / sqrt(a_n))``."""
    from .core import orthopoly
    check_parameter(family)
    lam = float(lam)
    lo, hi = n_window
    mv = M_of(family, lam, check=False)
    tr = u_minus_noncritical(family, lam, max(N_seed, hi + 1), N_seed)
    psi_th = complex(tr.values(0)) / (2j * math.sqrt(1 - family.d ** 2) * mv.M ** 2)
    use = psi_th if psi is None else psi
    n = np.arange(lo, hi + 1)
    P = orthopoly(family, lam, hi).P(n).real
    err = np.abs(P - 2 * np.real(use * np.conj(tr.values(n))))
    a, _ = coeff_values(family, n)
    env = 2 * abs(psi_th) * mv.M / np.sqrt(a)
    return NonCriticalDecompositionReport(lam, (lo, hi), float(np.max(err / env)), use)


def gaussian_density(lam):
    """Density of the ``a_n = sqrt(n)``, ``b = 0`` matrix."""
    lam = np.asarray(lam, dtype=float)
    return np.exp(-lam * lam / 2) / math.sqrt(2 * math.pi)
