r"""Asymptotic machinery for the critical case.

Chain scalars
    ``d_n = (lam - b_n)/(2 a_n)``,
    ``c_n = 1 - 4 a_{n-1}^2 / ((lam - b_{n-1})(lam - b_n))``,
    ``chi_n`` (the unperturbed model of ``c_n``), ``g_n^{+-} = +-sqrt(chi_n) + alpha/(4n)``,
    ``h_n^{+-} = d_{n-1}(1 + g_n^{+-})`` and the multiplier
    :math:`\eta^-_n` whose product describes the decaying solution.

Square roots: :math:`\sqrt\lambda` is taken on the upper side of the cut for
real negative ``lam`` (``sqrt(-1) = i``), every other root is principal.

The Volterra solver handles diagonal systems
:math:`x_{n+1} = (\mathrm{diag}(\lambda_n, 1/\lambda_n) + R_n) x_n` and
returns the normalized small solution by exact backward substitution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import CoefficientFamily, Kind, coeff_values
from .errors import NoAdmissibleN0, PoleHit, ZeroLambda


def sqrt_upper(lam):
    """``sqrt`` with real negative arguments mapped to the upper side of the cut."""
    z = np.asarray(lam, dtype=complex)
    z = np.where(z.imag == 0, z.real + 0j, z)  # scrub -0.0 imaginary parts
    return np.sqrt(z)


@dataclass(frozen=True)
class ChainQuantities:
    n: int
    d: complex
    c: complex
    chi: complex
    sqrt_chi: complex
    g_plus: complex
    g_minus: complex
    eta_minus: complex
    h_plus: complex
    h_minus: complex
    sqrt_chi_direct: complex


@dataclass
class ChainArrays:
    """The chain scalars evaluated on an array of indices at one ``lam``."""

    n: np.ndarray
    d_prev: np.ndarray
    d: np.ndarray
    c: np.ndarray
    chi: np.ndarray
    sqrt_chi: np.ndarray
    sqrt_chi_direct: np.ndarray
    g_plus: np.ndarray
    g_minus: np.ndarray
    eta_minus: np.ndarray
    h_plus: np.ndarray
    h_minus: np.ndarray


def _require_critical(family: CoefficientFamily):
    if family.kind is not Kind.CRITICAL:
        raise ValueError("chain quantities are defined for the critical family only")


def eta_minus(alpha: float, n, lam):
    """Closed form of the multiplier :math:`\\eta^-_n(\\lambda)`."""
    n = np.asarray(n, dtype=float)
    lam = np.asarray(lam, dtype=complex)
    na = n ** alpha
    inner = 1.0 + lam / (4 * na) + alpha / (lam * n ** (1 - alpha))
    return (1.0 + lam / (2 * na) + alpha / (4 * n)
            - sqrt_upper(lam) / n ** (alpha / 2) * np.sqrt(inner + 0j))


def eta_minus_abs2(alpha: float, n, lam):
    """``|eta^-_n|^2`` for real negative ``lam`` via the exact polynomial identity."""
    n = np.asarray(n, dtype=float)
    return (1.0 - alpha / (2 * n) + alpha * lam / (4 * n ** (1 + alpha))
            + alpha ** 2 / (16 * n ** 2))


def chi_roots(alpha: float, n):
    """Roots ``lam^{+-}_n`` of ``chi_n`` and its pole ``-2 n^alpha``."""
    n = np.asarray(n, dtype=float)
    na = n ** alpha
    s = np.sqrt(1 - alpha / n)
    return 2 * na * (-1 + s), 2 * na * (-1 - s), -2 * na


def chain_arrays(family: CoefficientFamily, n, lam) -> ChainArrays:
    """All chain scalars at indices ``n >= 2`` (array) for one ``lam``."""
    _require_critical(family)
    alpha = family.alpha
    n = np.asarray(n, dtype=float)
    lam = np.asarray(lam, dtype=complex)
    a_prev, b_prev = coeff_values(family, n - 1)
    a_n, b_n = coeff_values(family, n)
    den_c = (lam - b_prev) * (lam - b_n)
    if np.any(den_c == 0) or np.any(a_n == 0):
        raise PoleHit(f"chain denominator vanishes at lambda={lam!r}")
    d_prev = (lam - b_prev) / (2 * a_prev)
    d = (lam - b_n) / (2 * a_n)
    c = 1.0 - 4 * a_prev ** 2 / den_c
    na = n ** alpha
    num = lam / na + lam ** 2 / (4 * na ** 2) + alpha / n
    den = 1.0 + lam / (2 * na)
    chi = num / den ** 2
    inner = 1.0 + lam / (4 * na) + alpha / (lam * n ** (1 - alpha))
    sq = sqrt_upper(lam) / n ** (alpha / 2) * np.sqrt(inner + 0j) / den
    sq_direct = sqrt_upper(num) / den
    gp = sq + alpha / (4 * n)
    gm = -sq + alpha / (4 * n)
    eta = eta_minus(alpha, n, lam)
    return ChainArrays(n, d_prev, d, c, chi, sq, sq_direct, gp, gm, eta,
                       d_prev * (1 + gp), d_prev * (1 + gm))


def chain_at(family: CoefficientFamily, n: int, lam) -> ChainQuantities:
    if n < 2:
        raise ValueError("chain quantities start at n = 2")
    ch = chain_arrays(family, np.array([n]), lam)
    return ChainQuantities(
        n=n, d=complex(ch.d[0]), c=complex(ch.c[0]), chi=complex(ch.chi[0]),
        sqrt_chi=complex(ch.sqrt_chi[0]), g_plus=complex(ch.g_plus[0]),
        g_minus=complex(ch.g_minus[0]), eta_minus=complex(ch.eta_minus[0]),
        h_plus=complex(ch.h_plus[0]), h_minus=complex(ch.h_minus[0]),
        sqrt_chi_direct=complex(ch.sqrt_chi_direct[0]))


# ---------------------------------------------------------------------------
# choosing N0

def window_samples(window, n_boundary: int = 64, n_interior: int = 32) -> np.ndarray:
    """Deterministic sample of a window.

    ``window`` is either a real interval ``(lo, hi)`` (upper side of the cut)
    or a complex rectangle ``(re_lo, re_hi, im_lo, im_hi)``.
    """
    if len(window) == 2:
        lo, hi = window
        pts = np.linspace(lo, hi, n_boundary + n_interior)
        return pts.astype(complex)
    re_lo, re_hi, im_lo, im_hi = window
    corners = [complex(re_lo, im_lo), complex(re_hi, im_lo),
               complex(re_hi, im_hi), complex(re_lo, im_hi)]
    per_side = max(1, n_boundary // 4)
    t = np.arange(per_side) / per_side
    edge = [c0 + (c1 - c0) * t for c0, c1 in zip(corners, corners[1:] + corners[:1])]
    k = max(1, int(round(math.sqrt(n_interior))))
    xs = np.linspace(re_lo, re_hi, k + 2)[1:-1]
    ys = np.linspace(im_lo, im_hi, k + 2)[1:-1]
    inner = (xs[:, None] + 1j * ys[None, :]).ravel()
    return np.concatenate(edge + [inner])


def _window_hits(window, x: np.ndarray) -> np.ndarray:
    """Which real points ``x`` lie in the (closed) window."""
    if len(window) == 2:
        lo, hi = sorted(window)
        return (x >= lo) & (x <= hi)
    re_lo, re_hi, im_lo, im_hi = window
    return (x >= re_lo) & (x <= re_hi) & (im_lo <= 0 <= im_hi)


def _contains_zero(window) -> bool:
    return bool(_window_hits(window, np.array([0.0]))[0])


def admissible(family: CoefficientFamily, N0: int, window, samples: np.ndarray,
               n_check: int = 12) -> bool:
    """All chain conditions hold on ``samples`` for ``n`` in ``[N0, 8 N0]``."""
    alpha = family.alpha
    ns = np.unique(np.round(np.geomspace(N0, 8 * N0, n_check)).astype(np.int64))
    ns = ns[ns >= 2]
    for n in ns:
        lam_p, lam_m, pole = chi_roots(alpha, n)
        if np.any(_window_hits(window, np.array([lam_p, lam_m, pole]))):
            return False
    nn = ns[:, None].astype(float)
    lam = samples[None, :]
    try:
        ch = chain_arrays(family, nn, lam)
    except PoleHit:
        return False
    with np.errstate(all="ignore"):
        ok = (np.abs(ch.eta_minus) >= 0.5) & (np.abs(ch.g_plus) <= 0.5) \
            & (np.abs(ch.g_minus) <= 0.5) & (ch.sqrt_chi.real >= -1e-12) \
            & (np.abs(ch.d_prev) >= 0.25)
    return bool(np.all(ok) and np.all(np.isfinite(ch.eta_minus)))


def select_N0(family: CoefficientFamily, window, n_boundary: int = 64,
              n_interior: int = 32, ceiling: int = 1 << 26) -> int:
    """Smallest power of two ``N0`` passing :func:`admissible` on the window sample."""
    _require_critical(family)
    if _contains_zero(window):
        raise NoAdmissibleN0("window touches lambda = 0")
    samples = window_samples(window, n_boundary, n_interior)
    N0 = 2
    while N0 <= ceiling:
        if admissible(family, N0, window, samples):
            return N0
        N0 *= 2
    raise NoAdmissibleN0(f"no admissible N0 below {ceiling} for window {window}")


# ---------------------------------------------------------------------------
# Volterra solver

@dataclass
class DiagonalSystem:
    """``x_{n+1} = (diag(lam_n, 1/lam_n) + R_n) x_n`` for ``n = start, start + 1, ...``."""

    lam_seq: np.ndarray
    rem_seq: np.ndarray
    start: int = 1
    C: float | None = None

    def __post_init__(self):
        self.lam_seq = np.asarray(self.lam_seq, dtype=complex)
        self.rem_seq = np.asarray(self.rem_seq, dtype=complex).reshape(-1, 2, 2)
        if self.lam_seq.shape[0] != self.rem_seq.shape[0]:
            raise ValueError("lam_seq and rem_seq lengths differ")

    def weight_sum(self) -> float:
        """``sum |lam_k| ||R_k||`` over the stored range."""
        return float(np.sum(np.abs(self.lam_seq) * _inf_norm(self.rem_seq)))

    def estimate_C(self, safety: float = 2.0) -> float:
        """Constant with ``prod_{p..q} |lam_l| >= 1/C`` over the stored range.

        The minimum over contiguous blocks of ``sum log|lam_l|`` (Kadane) gives
        the smallest block product; the safety factor covers the unseen tail.
        """
        if self.C is not None:
            return float(self.C)
        logs = np.log(np.abs(self.lam_seq))
        best = cur = 0.0
        for v in logs:
            cur = min(v, cur + v)
            best = min(best, cur)
        return safety * math.exp(-best)


def _inf_norm(m: np.ndarray) -> np.ndarray:
    return np.max(np.sum(np.abs(m), axis=-1), axis=-1)


@dataclass
class VolterraSolution:
    """Normalized small solution ``x~_n`` for ``n = start .. start + len - 1``."""

    values: np.ndarray
    tail_bound: np.ndarray
    terms_used: int
    start: int
    C: float

    def at(self, n: int) -> np.ndarray:
        return self.values[n - self.start]


def volterra_solve(system: DiagonalSystem, n_max: int) -> VolterraSolution:
    """Solve the truncated Volterra equation (remainders beyond ``n_max`` set to zero).

    ``tail_bound[n] = exp(sum_{k>=n} (C^2+1)|lam_k| ||R_k||) - 1`` bounds
    ``||x~_n - e_-||`` in the max norm.
    """
    K = n_max - system.start + 1
    if K < 0 or K > system.lam_seq.size:
        raise ValueError("n_max outside the stored range")
    lam = system.lam_seq[:K]
    if np.any(lam == 0):
        raise ZeroLambda("diagonal entry lambda_k = 0")
    rem = np.ascontiguousarray(system.rem_seq[:K])
    values = _kernels.volterra_backsub(lam, rem)
    C = system.estimate_C()
    w = (C * C + 1.0) * np.abs(lam) * _inf_norm(rem)
    tail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
    return VolterraSolution(values, np.expm1(tail), K, system.start, C)
