r"""Densities of stabilized matrices and the resolvent oracle.

The stabilized matrix :math:`J_N` repeats :math:`(a_N, b_N)` from row N on.
Its density on the band :math:`(b_N - 2a_N, b_N + 2a_N)` is expressed through
the polynomials of the original matrix; :func:`weyl_m_stabilized` gives the
same number through the Weyl function :math:`m_N = -\Theta_N/\Phi_N`, and
:func:`resolvent_density` gives it once more, independently, by solving the
shifted tridiagonal system and extrapolating :math:`\varepsilon \to 0`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .core import CoefficientFamily, coeff_arrays, coeff_values, coeffs, orthopoly
from .errors import BandEdge, NoConvergence, OutsideBand, SingularSystem, ZeroPhi
from .extrapolate import richardson


class Regime(str, enum.Enum):
    ON_BAND = "on_band"
    OFF_BAND = "off_band"


class Route(str, enum.Enum):
    STABILIZED = "stabilized"
    PHI_THETA = "phi_theta"
    RESOLVENT = "resolvent"
    CRITICAL = "critical"
    NONCRITICAL = "noncritical"


@dataclass(frozen=True)
class BranchValue:
    z: complex
    regime: Regime


@dataclass(frozen=True)
class WeylValue:
    m: complex
    route: Route
    trunc: int | None = None


@dataclass(frozen=True)
class DensityResult:
    lam: float
    value: float
    route: Route
    uncertainty: float = 0.0


@dataclass(frozen=True)
class StabilizedModel:
    N: int
    a_N: float
    b_N: float

    @classmethod
    def of(cls, family: CoefficientFamily, N: int) -> StabilizedModel:
        c = coeffs(family, N)
        return cls(N, c.a, c.b)

    @property
    def band(self) -> tuple[float, float]:
        return (self.b_N - 2 * self.a_N, self.b_N + 2 * self.a_N)

    def inside(self, lam: float, margin: float = 0.0) -> bool:
        lo, hi = self.band
        pad = margin * (hi - lo)
        return lo + pad < lam < hi - pad


def z_branch(lam: complex, a: float, b: float) -> BranchValue:
    """Characteristic root of the constant-tail recurrence with ``|z| <= 1``.

    On the real band this is ``w - i sqrt(1 - w^2)`` with ``w = (lam-b)/(2a)``;
    elsewhere the smaller-modulus root of ``z + 1/z = 2w``, chosen by direct
    magnitude comparison.
    """
    lam = complex(lam)
    w = (lam - b) / (2.0 * a)
    if lam.imag == 0.0 and abs(w.real) <= 1.0:
        x = w.real
        return BranchValue(complex(x, -math.sqrt(max(0.0, 1.0 - x * x))), Regime.ON_BAND)
    s = np.sqrt(w * w - 1.0)
    r1, r2 = w + s, w - s
    big = r1 if abs(r1) >= abs(r2) else r2
    return BranchValue(complex(1.0 / big), Regime.OFF_BAND)


def _check_band(model: StabilizedModel, lam: float, margin: float):
    if not model.inside(lam, margin):
        raise OutsideBand(f"lambda={lam!r} outside band {model.band} (margin {margin})")


EDGE_MARGIN = 0.01


def rho_stabilized(family: CoefficientFamily, N: int, lam: float,
                   margin: float = EDGE_MARGIN) -> DensityResult:
    """Density of :math:`J_N` at a real ``lam`` inside its open band.

    ``margin`` is the excluded distance from each edge as a fraction of the
    band width; pass 0 to evaluate up to the edges.
    """
    model = StabilizedModel.of(family, N)
    _check_band(model, lam, margin)
    poly = orthopoly(family, lam, N)
    w = (lam - model.b_N) / (2 * model.a_N)
    z = z_branch(lam, model.a_N, model.b_N).z
    # |P_{N+1} - z P_N|^2 with the common scale pulled out
    lp_N, lp_N1 = poly.log_p[N], poly.log_p[N + 1]
    ref = max(lp_N, lp_N1)
    diff = poly.p[N + 1] * math.exp(lp_N1 - ref) - z * poly.p[N] * math.exp(lp_N - ref)
    log_den = math.log(math.pi * model.a_N) + 2 * (math.log(abs(diff)) + ref)
    value = math.exp(0.5 * math.log1p(-w * w) - log_den)
    return DensityResult(float(lam), value, Route.STABILIZED)


def phi_theta(family: CoefficientFamily, N: int, lam: complex) -> tuple[complex, complex]:
    r"""Coefficients :math:`\Phi_N, \Theta_N` of ``P`` and ``Q`` along ``z^{-n}``.

    Powers of ``z`` enter through ``exp(N log z)`` combined with the
    polynomial scale, so large ``N`` neither under- nor overflows.
    """
    model = StabilizedModel.of(family, N)
    z = z_branch(lam, model.a_N, model.b_N).z
    denom = z - 1.0 / z
    if abs(denom) < 1e-14:
        raise BandEdge(f"lambda={lam!r} is a band edge of J_{N}")
    poly = orthopoly(family, lam, N)
    logz = np.log(z)

    def coef(mant, logs):
        ref = max(logs[N], logs[N + 1])
        t = mant[N] * math.exp(logs[N] - ref) * z - mant[N + 1] * math.exp(logs[N + 1] - ref)
        return complex(np.exp(N * logz + ref) * t / denom)

    return coef(poly.p, poly.log_p), coef(poly.q, poly.log_q)


def weyl_m_stabilized(family: CoefficientFamily, N: int, lam: complex) -> WeylValue:
    phi, theta = phi_theta(family, N, lam)
    if phi == 0 or not np.isfinite(abs(theta / phi)):
        raise ZeroPhi(f"Phi_{N}({lam!r}) vanishes")
    return WeylValue(-theta / phi, Route.PHI_THETA)


def rho_via_phi(family: CoefficientFamily, N: int, lam: float,
                margin: float = EDGE_MARGIN) -> float:
    r"""Density from :math:`1/(2\pi i a_N (z - 1/z) |\Phi_N|^2)` (real part returned)."""
    model = StabilizedModel.of(family, N)
    _check_band(model, lam, margin)
    phi, _ = phi_theta(family, N, lam)
    z = z_branch(lam, model.a_N, model.b_N).z
    val = 1.0 / (2j * math.pi * model.a_N * (z - 1.0 / z) * abs(phi) ** 2)
    return float(val.real)


# ---------------------------------------------------------------------------
# resolvent oracle

def _solve_tridiagonal(a: np.ndarray, b: np.ndarray, zeta: complex, T: int) -> complex:
    """First component of ``(T_trunc - zeta)^{-1} e_1`` by pivoted tridiagonal LU."""
    off = a[1:T].astype(complex)
    diag = b[1:T + 1] - zeta
    rhs = np.zeros(T, dtype=complex)
    rhs[0] = 1.0
    *_, x, info = lapack.zgtsv(off, diag, off.copy(), rhs)
    if info != 0:
        raise SingularSystem(f"tridiagonal solve failed (info={info}) at {zeta!r}")
    return complex(x[0])


def resolvent_m(family: CoefficientFamily, lam: float, eps: float, trunc: int = 1024,
                trunc_max: int = 1 << 24, tol: float = 1e-3) -> WeylValue:
    """Weyl function at ``lam + i eps`` from truncated resolvents.

    The truncation doubles until ``|m_{2T} - m_T| < tol |m_{2T}|``; the value
    at the larger size is returned.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if trunc < 100:
        raise ValueError("trunc must be >= 100")
    zeta = complex(lam, eps)
    prev = _solve_tridiagonal(*coeff_arrays(family, trunc), zeta, trunc)
    T = trunc
    while 2 * T <= trunc_max:
        T *= 2
        cur = _solve_tridiagonal(*coeff_arrays(family, T), zeta, T)
        if not np.isfinite(cur):
            raise SingularSystem(f"non-finite resolvent at {zeta!r}")
        if abs(cur - prev) < tol * abs(cur):
            return WeylValue(cur, Route.RESOLVENT, T)
        prev = cur
    raise NoConvergence(f"truncation ceiling {trunc_max} reached at {zeta!r}")


def resolvent_density(family: CoefficientFamily, lam: float, h: float = 1e-3,
                      order: int = 2, eps=None, **kw) -> DensityResult:
    """``Im m(lam + i eps)/pi`` extrapolated to ``eps -> 0``.

    By default ``eps = 2^k h`` for ``k = order .. 0``; an explicit geometric
    ``eps`` schedule may be passed instead.  The smoothing error is a power
    series in ``eps`` so the tableau removes ``eps, eps^2, ...``.
    """
    if eps is None:
        eps = [h * 2.0 ** k for k in range(order, -1, -1)]
    else:
        eps = sorted((float(e) for e in eps), reverse=True)
        order = len(eps) - 1
    ratios = [e0 / e1 for e0, e1 in zip(eps, eps[1:])]
    if ratios and max(ratios) - min(ratios) > 1e-9 * max(ratios):
        raise ValueError("eps schedule must be geometric")
    ratio = ratios[0] if ratios else 2.0
    vals = [resolvent_m(family, lam, e, **kw).m.imag / math.pi for e in eps]
    ex = richardson(vals, ratio, range(1, order + 1))
    return DensityResult(float(lam), float(ex.value), Route.RESOLVENT, ex.uncertainty)


def free_density(lam):
    """Closed-form density of the free matrix ``a = 1, b = 0``."""
    lam = np.asarray(lam, dtype=float)
    return np.sqrt(np.clip(4.0 - lam * lam, 0.0, None)) / (2.0 * np.pi)


def band_of(family: CoefficientFamily, N: int) -> tuple[float, float]:
    a, b = coeff_values(family, np.array([N]))
    return (float(b[0] - 2 * a[0]), float(b[0] + 2 * a[0]))
