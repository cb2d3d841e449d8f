r"""Spectral density of the critical family on the negative half-line.

For ``a_n = n^alpha + p_n``, ``b_n = -2 n^alpha + q_n`` and real
``lam < 0`` the density is

.. math::

    \rho'(\lambda) = \frac{\sqrt{-\lambda}\,H^2(\lambda)}{\pi |u^-_0(\lambda)|^2}
                   = \frac{1}{4\pi\sqrt{-\lambda}|\Psi(\lambda)|^2 H^2(\lambda)},

where :math:`u^-` is the solution with :math:`u^-_n \approx \prod_{l=N_0}^{n}\eta^-_l`,
:math:`H = \lim n^{\alpha/4}\prod_{l=N_0}^{n}|\eta^-_l|` and
:math:`u^-_0 = (\lambda - b_1)u^-_1 - a_1 u^-_2`.

:math:`u^-` is obtained by seeding the refined asymptotic direction
``(1, h^-_N)`` at a large index ``N`` and running the exact recurrence
backward; the seed error shrinks as ``N`` grows and is removed by
extrapolating over a geometric schedule of seeds.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import (DEFAULT_SCALE_THRESHOLD, CoefficientFamily, Kind, coeff_arrays,
                   coeff_values, orthopoly)
from .errors import NoAdmissibleIndices, SeedDegenerate
from .extrapolate import aitken, richardson
from .levinson import (DiagonalSystem, chain_arrays, eta_minus, eta_minus_abs2,
                       select_N0, volterra_solve)
from .stabilized import DensityResult, Route

DEFAULT_WINDOW = (-4.0, -0.5)
DEFAULT_SEEDS = (1 << 14, 1 << 16, 1 << 18)
DEFAULT_H_CHECKPOINT = 1 << 20
MIN_R = 0.05


class Method(str, enum.Enum):
    BACKWARD = "backward_recurrence"
    CHAIN_VOLTERRA = "chain_volterra"


@dataclass
class SolutionTrace:
    """A solution of the eigenvector equation stored as log-modulus and unwrapped phase.

    Entry ``k`` of the arrays refers to the row ``n_start + k``.
    """

    lam: complex
    n_start: int
    log_abs: np.ndarray
    phase: np.ndarray
    seed_index: int
    method: Method
    N0: int | None = None

    @classmethod
    def from_scaled(cls, lam, n_start, mant, logs, base: complex = 0j, **kw) -> SolutionTrace:
        """Build from kernel output; ``base`` is a complex log factor applied to every entry."""
        log_abs = np.log(np.abs(mant)) + logs + base.real
        phase = np.unwrap(np.angle(mant)) + base.imag
        return cls(lam, n_start, log_abs, phase, **kw)

    @property
    def n_range(self) -> tuple[int, int]:
        return (self.n_start, self.n_start + self.log_abs.size - 1)

    def values(self, n=None) -> np.ndarray:
        if n is None:
            return np.exp(self.log_abs + 1j * self.phase)
        k = np.asarray(n) - self.n_start
        return np.exp(self.log_abs[k] + 1j * self.phase[k])

    def conjugate(self) -> SolutionTrace:
        return SolutionTrace(np.conj(self.lam), self.n_start, self.log_abs.copy(),
                             -self.phase, self.seed_index, self.method, self.N0)


@dataclass(frozen=True)
class CriticalDensityInputs:
    H: float
    u0_minus: complex
    psi: complex
    H_uncertainty: float = 0.0


@dataclass(frozen=True)
class CriticalDensityResult(DensityResult):
    inputs: CriticalDensityInputs | None = None
    form_psi: float = float("nan")
    form_u0: float = float("nan")
    seeds: tuple[int, ...] = ()
    per_seed: tuple[float, ...] = ()
    N0: int = 0


def _require_critical(family: CoefficientFamily):
    if family.kind is not Kind.CRITICAL:
        raise ValueError("expected a critical family")


@functools.lru_cache(maxsize=64)
def _cached_N0(family: CoefficientFamily, window: tuple) -> int:
    return select_N0(family, window)


def resolve_N0(family: CoefficientFamily, window=DEFAULT_WINDOW, N0: int | None = None) -> int:
    if N0 is not None:
        return int(N0)
    return _cached_N0(family, tuple(float(w) for w in window))


def _check_lambda(lam: float, window):
    lo, hi = sorted(window[:2])
    if hi >= -MIN_R + 1e-15 and hi > -MIN_R:
        raise ValueError(f"window {window} reaches closer than {MIN_R} to lambda = 0")
    if not lo <= lam <= hi:
        raise ValueError(f"lambda={lam!r} outside the validated window {window}")


def log_eta_product(alpha: float, lam, start: int, stop: int) -> complex:
    """``log prod_{l=start}^{stop-1} eta^-_l`` (complex log, pairwise summed)."""
    if stop <= start:
        return 0j
    logs = np.log(eta_minus(alpha, np.arange(start, stop, dtype=float), lam))
    return complex(np.sum(logs.real), np.sum(logs.imag))


def u_minus(family: CoefficientFamily, lam: complex, n_max: int, N_seed: int,
            N0: int | None = None, window=DEFAULT_WINDOW,
            method: Method = Method.BACKWARD, n_chain: int | None = None,
            seed_factor: complex = 1.0) -> SolutionTrace:
    """The solution ``u^-`` on rows ``0 .. n_max`` (row 0 uses ``a_0 = 1``).

    ``seed_factor`` multiplies the second seed component; values other than
    one deliberately corrupt the seed (used to exercise failure reporting).
    """
    _require_critical(family)
    N0 = resolve_N0(family, window, N0)
    if N_seed < 8 * N0:
        raise ValueError(f"N_seed={N_seed} must be >= 8*N0 = {8 * N0}")
    if n_max < N_seed:
        raise ValueError("n_max must be >= N_seed")
    if method is Method.CHAIN_VOLTERRA:
        return _u_minus_chain(family, lam, N0, N_seed, n_chain or 4 * N_seed)
    ch = chain_arrays(family, np.array([float(N_seed)]), lam)
    hm, hp = complex(ch.h_minus[0]), complex(ch.h_plus[0])
    if abs(hm - hp) < 1e-8:
        raise SeedDegenerate(f"h^- and h^+ coincide at N_seed={N_seed}, lambda={lam!r}")
    base = log_eta_product(family.alpha, lam, N0, N_seed)
    a, b = coeff_arrays(family, n_max + 1)
    lam_c = complex(lam)
    u_prev, u_cur = 1.0 + 0j, hm * seed_factor
    lo_m, lo_l = _kernels.backward(lam_c, a, b, u_prev, u_cur, N_seed, DEFAULT_SCALE_THRESHOLD)
    hi_m, hi_l = _kernels.forward(lam_c, a, b, u_prev, u_cur, N_seed, n_max,
                                  DEFAULT_SCALE_THRESHOLD)
    mant = np.concatenate([lo_m, hi_m[N_seed + 1:]])
    logs = np.concatenate([lo_l, hi_l[N_seed + 1:]])
    return SolutionTrace.from_scaled(lam, 0, mant, logs, base, seed_index=N_seed,
                                     method=Method.BACKWARD, N0=N0)


def chain_system(family: CoefficientFamily, lam, N0: int, n_last: int):
    """The diagonal system reached from the eigenvector equation by the chain of substitutions.

    Returns ``(system, chain)`` where ``system`` covers ``n = N0 .. n_last``
    and ``chain`` holds the scalars on ``N0 .. n_last + 1``.
    """
    n = np.arange(N0, n_last + 2, dtype=float)
    ch = chain_arrays(family, n, lam)
    gp, gm, c = ch.g_plus, ch.g_minus, ch.c
    # y-system: W_{n+1}^{-1} [[1,1],[c_n,1]] W_n - diag(1+g+_n, 1+g-_n)
    gp0, gm0, gp1, gm1, cn = gp[:-1], gm[:-1], gp[1:], gm[1:], c[:-1]
    m00 = 1 + gp0
    m01 = 1 + gm0
    m10 = cn + gp0
    m11 = cn + gm0
    inv_det = 1.0 / (gm1 - gp1)
    a00 = inv_det * (gm1 * m00 - m10)
    a01 = inv_det * (gm1 * m01 - m11)
    a10 = inv_det * (-gp1 * m00 + m10)
    a11 = inv_det * (-gp1 * m01 + m11)
    rem = np.empty((n.size - 1, 2, 2), dtype=complex)
    rem[:, 0, 0] = a00 - (1 + gp0)
    rem[:, 0, 1] = a01
    rem[:, 1, 0] = a10
    rem[:, 1, 1] = a11 - (1 + gm0)
    sp, sm = np.sqrt(1 + gp0), np.sqrt(1 + gm0)
    lam_seq = sp / sm
    rem_x = rem / (sp * sm)[:, None, None]
    return DiagonalSystem(lam_seq, rem_x, start=N0, C=1.0), ch


def y_remainder_closed_form(family: CoefficientFamily, lam, n):
    """Second term of the y-system written out entrywise (independent of :func:`chain_system`)."""
    n = np.asarray(n, dtype=float)
    c0 = chain_arrays(family, n, lam)
    c1 = chain_arrays(family, n + 1, lam)
    ap = c1.g_plus - c0.g_plus + c0.g_plus * c1.g_plus - c0.c
    am = c1.g_minus - c0.g_minus + c0.g_minus * c1.g_minus - c0.c
    f = 1.0 / (c1.g_minus - c1.g_plus)
    out = np.empty(n.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = f * ap
    out[..., 0, 1] = f * am
    out[..., 1, 0] = -f * ap
    out[..., 1, 1] = -f * am
    return out


def _u_minus_chain(family, lam, N0, N_seed, n_chain) -> SolutionTrace:
    """Validation route: Volterra solution of the diagonal system mapped back to ``u``."""
    system, ch = chain_system(family, lam, N0, n_chain)
    sol = volterra_solve(system, n_chain)
    x = sol.values  # rows N0 .. n_chain + 1
    k = np.arange(x.shape[0])
    gp, gm, d_prev = ch.g_plus[k], ch.g_minus[k], ch.d_prev[k]
    # prefactor prod_{l=N0-1}^{n-2} d_l * prod_{l=N0}^{n-1} (1 + g-_l)
    log_fac = np.concatenate([[0j], np.cumsum(np.log(d_prev[:-1] * (1 + gm[:-1])))])
    first = x[:, 0] + x[:, 1]
    second = d_prev * ((1 + gp) * x[:, 0] + (1 + gm) * x[:, 1])
    # rows N0-1 .. n_chain+1: u_{n-1} from each vector, plus u_n of the last one
    vals = np.concatenate([first * np.exp(log_fac), [second[-1] * np.exp(log_fac[-1])]])
    # continue down to row 0 with the exact recurrence
    a, b = coeff_arrays(family, n_chain + 3)
    lo_m, lo_l = _kernels.backward(complex(lam), a, b, complex(vals[0]), complex(vals[1]),
                                   N0, DEFAULT_SCALE_THRESHOLD)
    lo = lo_m[:N0 - 1] * np.exp(lo_l[:N0 - 1])
    full = np.concatenate([lo, vals])
    trace = SolutionTrace.from_scaled(lam, 0, full, np.zeros(full.size),
                                      seed_index=N_seed, method=Method.CHAIN_VOLTERRA, N0=N0)
    trace.volterra = sol
    return trace


def u0_minus_of(trace: SolutionTrace, family: CoefficientFamily) -> complex:
    """``(lam - b_1) u_1 - a_1 u_2``."""
    a1, b1 = coeff_values(family, np.array([1.0]))
    u1, u2 = trace.values(np.array([1, 2]))
    return complex((trace.lam - b1[0]) * u1 - a1[0] * u2)


# ---------------------------------------------------------------------------
# H

@dataclass(frozen=True)
class HResult:
    H: float
    uncertainty: float
    checkpoints: tuple[int, ...]
    raw: tuple[float, ...]


def _log_abs_eta_terms(alpha: float, lam: float, start: int, stop: int) -> np.ndarray:
    n = np.arange(start, stop + 1, dtype=float)
    x = -alpha / (2 * n) + alpha * lam / (4 * n ** (1 + alpha)) + alpha ** 2 / (16 * n ** 2)
    return 0.5 * np.log1p(x)


def H_of(family: CoefficientFamily, lam: float, N0: int,
         n1: int = DEFAULT_H_CHECKPOINT) -> HResult:
    """``lim n^(alpha/4) prod_{l=N0}^n |eta^-_l|`` extrapolated from ``n1, 2 n1, 4 n1``.

    The log of the partial sequence has error terms ``n^-alpha`` (from the
    ``alpha lam / (4 n^(1+alpha))`` part of ``|eta|^2``) and ``n^-1``;
    both are eliminated.
    """
    _require_critical(family)
    alpha = family.alpha
    lam = float(np.real(lam))
    cps = (n1, 2 * n1, 4 * n1)
    terms = _log_abs_eta_terms(alpha, lam, N0, cps[-1])
    logs, start, acc = [], N0, 0.0
    for cp in cps:
        acc += float(np.sum(terms[start - N0:cp - N0 + 1]))
        start = cp + 1
        logs.append(alpha / 4 * math.log(cp) + acc)
    ex = richardson(logs, 2.0, (alpha, 1.0))
    H = math.exp(ex.value)
    return HResult(H, H * ex.uncertainty, cps, tuple(math.exp(v) for v in logs))


def raw_H(family: CoefficientFamily, lam: float, N0: int, n: int) -> float:
    """Unextrapolated ``n^(alpha/4) prod |eta^-_l|`` from the complex multipliers."""
    alpha = family.alpha
    eta = eta_minus(alpha, np.arange(N0, n + 1, dtype=float), lam)
    return math.exp(alpha / 4 * math.log(n) + math.fsum(np.log(np.abs(eta))))


# ---------------------------------------------------------------------------
# density

def _u0_for_seed(family, lam, N_seed, N0, seed_factor=1.0) -> complex:
    trace = u_minus(family, lam, N_seed, N_seed, N0=N0, seed_factor=seed_factor)
    return complex(trace.values(0))


def rho_critical(family: CoefficientFamily, lam: float, window=DEFAULT_WINDOW,
                 N0: int | None = None, seeds=DEFAULT_SEEDS,
                 n1: int = DEFAULT_H_CHECKPOINT) -> CriticalDensityResult:
    """Critical-case density at real ``lam`` inside ``window``.

    The value is extrapolated over the seed schedule; ``inputs`` hold H,
    ``u_0^-`` and Psi for the largest seed.
    """
    _require_critical(family)
    lam = float(lam)
    _check_lambda(lam, window)
    N0 = resolve_N0(family, window, N0)
    h = H_of(family, lam, N0, n1)
    s = math.sqrt(-lam)
    u0s = [_u0_for_seed(family, lam, int(ns), N0) for ns in seeds]
    per_seed = [s * h.H ** 2 / (math.pi * abs(u0) ** 2) for u0 in u0s]
    ex = aitken(per_seed)
    value = float(np.real(ex.value))
    unc = math.hypot(ex.uncertainty, 2 * value * h.uncertainty / h.H)
    u0 = u0s[-1]
    psi = u0 / (2j * s * h.H ** 2)
    form_psi = 1.0 / (4 * math.pi * s * abs(psi) ** 2 * h.H ** 2)
    return CriticalDensityResult(
        lam, value, Route.CRITICAL, unc,
        inputs=CriticalDensityInputs(h.H, u0, psi, h.uncertainty),
        form_psi=form_psi, form_u0=per_seed[-1], seeds=tuple(int(x) for x in seeds),
        per_seed=tuple(per_seed), N0=N0)


def subsequence_ok(family: CoefficientFamily, n, tolerance: float = 1.0) -> np.ndarray:
    """``max(|p_n|, |q_n|) * n^(alpha/2) <= tolerance * n^-alpha`` elementwise."""
    n = np.asarray(n, dtype=float)
    alpha = family.alpha
    kappa = np.maximum(np.abs(family.p.values(n)), np.abs(family.q.values(n)))
    return kappa * n ** (alpha / 2) <= tolerance * n ** (-alpha)


def pick_subsequence(family: CoefficientFamily, count: int, n1: int = 32,
                     tolerance: float = 1.0, ceiling: int = 1 << 30,
                     block: int = 1 << 14) -> list[int]:
    """Indices ``n_k`` along which the stabilized densities converge.

    Candidates follow the geometric schedule ``ceil(n1 * 2^(k-1))``.  Power
    perturbations decaying faster than ``n^(-3 alpha/2)`` satisfy the
    admissibility test of :func:`subsequence_ok` eventually and the
    schedule is returned as is; otherwise each inadmissible candidate is
    replaced by the next admissible index found by a forward scan.
    """
    _require_critical(family)
    alpha = family.alpha
    perts = (family.p, family.q)
    if all(p.is_zero or (p.kind == "power" and p.exponent > 1.5 * alpha) for p in perts):
        return [max(math.ceil(n1 * 2 ** k), 1) for k in range(count)]
    # a slower power rule only gets worse with n: once it fails it always fails
    monotone_bad = any(p.kind == "power" and not p.is_zero and p.exponent < 1.5 * alpha
                       for p in perts)
    out: list[int] = []
    for k in range(count):
        n = max(math.ceil(n1 * 2 ** k), out[-1] + 1 if out else 1)
        while True:
            if n > ceiling:
                raise NoAdmissibleIndices(f"no admissible index below {ceiling}")
            cand = np.arange(n, min(n + block, ceiling + 1))
            hit = np.flatnonzero(subsequence_ok(family, cand, tolerance))
            if hit.size:
                n = int(cand[hit[0]])
                break
            if monotone_bad:
                raise NoAdmissibleIndices(
                    f"perturbation decays slower than n^(-3 alpha/2); no admissible index >= {n}")
            n = int(cand[-1]) + 1
        out.append(n)
    return out


# ---------------------------------------------------------------------------
# identity checks

@dataclass
class WronskianReport:
    lam: float
    target: complex
    seeds: tuple[int, ...]
    values: list[complex]
    constancy: list[float]
    deviations: list[float]
    extrapolated: complex
    extrapolated_deviation: float
    decreasing: bool
    sign_ok: bool


def trace_wronskian(trace: SolutionTrace, other: SolutionTrace, a: np.ndarray, n) -> np.ndarray:
    n = np.asarray(n)
    u, v = trace.values(), other.values()
    k = n - trace.n_start
    return a[n] * (u[k] * v[k + 1] - u[k + 1] * v[k])


def wronskian_identity_check(family: CoefficientFamily, lam: float, window=DEFAULT_WINDOW,
                             N0: int | None = None, seeds=DEFAULT_SEEDS,
                             ns=(10, 100, 1000, 10000), n1: int = DEFAULT_H_CHECKPOINT,
                             seed_factor: complex = 1.0) -> WronskianReport:
    """``W{u+, u-}`` against ``-2 i sqrt(-lam) H^2`` for every seed in the schedule."""
    lam = float(lam)
    N0 = resolve_N0(family, window, N0)
    h = H_of(family, lam, N0, n1)
    target = -2j * math.sqrt(-lam) * h.H ** 2
    ns = np.asarray(ns)
    values, const, devs = [], [], []
    for N_seed in seeds:
        n_max = max(int(N_seed), int(ns.max()) + 1)
        tr = u_minus(family, lam, n_max, int(N_seed), N0=N0, window=window,
                     seed_factor=seed_factor)
        a, _ = coeff_arrays(family, n_max + 1)
        w = trace_wronskian(tr.conjugate(), tr, a, ns)
        values.append(complex(w[0]))
        const.append(float(np.max(np.abs(w - w[0])) / abs(w[0])))
        devs.append(abs(w[0] - target) / abs(target))
    ex = aitken(values)
    ex_dev = abs(ex.value - target) / abs(target)
    decreasing = all(d1 < d0 for d0, d1 in zip(devs, devs[1:]))
    sign_ok = (1j * values[-1]).real > 0
    return WronskianReport(lam, target, tuple(seeds), values, const, devs, complex(ex.value),
                           float(ex_dev), decreasing, bool(sign_ok))


@dataclass
class DecompositionReport:
    lam: float
    n_window: tuple[int, int]
    max_error: float
    psi: complex


def decomposition_check(family: CoefficientFamily, lam: float, n_window=(10_000, 20_000),
                        window=DEFAULT_WINDOW, N0: int | None = None,
                        N_seed: int = DEFAULT_SEEDS[-1], psi: complex | None = None,
                        n1: int = DEFAULT_H_CHECKPOINT) -> DecompositionReport:
    """Max over ``n_window`` of ``|P_n - 2 Re(Psi u+_n)| / (2 |Psi| H n^(-alpha/4))``.

    ``psi`` overrides the coefficient (e.g. zero for a sanity floor); the
    normalization always uses the Psi of the density formula.
    """
    lam = float(lam)
    N0 = resolve_N0(family, window, N0)
    lo, hi = n_window
    h = H_of(family, lam, N0, n1)
    n_max = max(N_seed, hi + 1)
    tr = u_minus(family, lam, n_max, N_seed, N0=N0, window=window)
    u0 = complex(tr.values(0))
    psi_th = u0 / (2j * math.sqrt(-lam) * h.H ** 2)
    use = psi_th if psi is None else psi
    n = np.arange(lo, hi + 1)
    P = orthopoly(family, lam, hi).P(n).real
    u_plus = np.conj(tr.values(n))
    err = np.abs(P - 2 * np.real(use * u_plus))
    env = 2 * abs(psi_th) * h.H * n ** (-family.alpha / 4)
    return DecompositionReport(lam, (lo, hi), float(np.max(err / env)), use)
