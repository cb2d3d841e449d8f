"""Coefficient families, orthogonal polynomials, transfer matrices, Wronskians.

Everything here works with 1-based matrix rows: ``a_n`` is the off-diagonal
entry of row ``n`` and ``b_n`` the diagonal one.  Coefficient arrays returned
by :func:`coeff_arrays` are indexed directly by ``n`` with ``a[0] = 1`` (the
formal ``a_0`` used in the Wronskian bookkeeping at index zero).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import NonPositiveEntry

DEFAULT_SCALE_THRESHOLD = 1e100


class Kind(str, enum.Enum):
    CRITICAL = "critical"
    NONCRITICAL = "noncritical"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class Perturbation:
    """Closed-form perturbation rule ``n -> value``.

    ``kind`` is one of ``"zero"``, ``"power"`` (``coef * n**-exponent``) or
    ``"table"`` (finitely supported, ``table[n - 1]`` for ``n <= len(table)``).
    """

    kind: str = "zero"
    coef: float = 0.0
    exponent: float = 0.0
    table: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("zero", "power", "table"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        object.__setattr__(self, "table", tuple(float(t) for t in self.table))

    @classmethod
    def power(cls, coef: float, exponent: float) -> Perturbation:
        return cls("power", float(coef), float(exponent))

    @classmethod
    def from_table(cls, values) -> Perturbation:
        return cls("table", table=tuple(values))

    @property
    def is_zero(self) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "power":
            return self.coef == 0.0
        return not any(self.table)

    def values(self, n: np.ndarray) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        if self.kind == "power" and self.coef != 0.0:
            return self.coef * n ** (-self.exponent)
        out = np.zeros_like(n)
        if self.kind == "table" and self.table:
            tab = np.asarray(self.table)
            idx = n.astype(np.int64) - 1
            inside = (idx >= 0) & (idx < tab.size)
            out[inside] = tab[idx[inside]]
        return out

    def weighted_l1(self, alpha: float) -> bool:
        """Whether ``{value_n / n^(alpha/2)}`` is summable (decided symbolically)."""
        if self.kind == "power" and self.coef != 0.0:
            return self.exponent + alpha / 2 > 1.0
        return True


@dataclass(frozen=True)
class CoefficientFamily:
    """Generator of Jacobi entries ``(a_n, b_n)``.

    Use the constructors :meth:`critical`, :meth:`noncritical` and
    :meth:`explicit` rather than filling fields by hand.
    """

    kind: Kind
    alpha: float | None = None
    p: Perturbation = field(default_factory=Perturbation)
    q: Perturbation = field(default_factory=Perturbation)
    beta: float | None = None
    d: float | None = None
    a_table: tuple[float, ...] = ()
    b_table: tuple[float, ...] = ()
    tail: str = "constant"

    @classmethod
    def critical(cls, alpha: float, p: Perturbation | None = None,
                 q: Perturbation | None = None) -> CoefficientFamily:
        """``a_n = n^alpha + p_n``, ``b_n = -2 n^alpha + q_n``."""
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        return cls(Kind.CRITICAL, alpha=float(alpha), p=p or Perturbation(),
                   q=q or Perturbation())

    @classmethod
    def noncritical(cls, beta: float, d: float) -> CoefficientFamily:
        """``a_n = n^beta``, ``b_n = 2 d a_n``."""
        if beta <= 0:
            raise ValueError("beta must be positive")
        return cls(Kind.NONCRITICAL, beta=float(beta), d=float(d))

    @classmethod
    def explicit(cls, a, b, tail: str = "constant") -> CoefficientFamily:
        """Finite tables continued by repeating the last entry of each.

        The tables may have different lengths; ``a = [1], b = [0]`` is the
        free matrix.
        """
        if not len(a) or not len(b):
            raise ValueError("explicit tables must be non-empty")
        if tail != "constant":
            raise ValueError(f"unsupported tail rule {tail!r}")
        return cls(Kind.EXPLICIT, a_table=tuple(float(x) for x in a),
                   b_table=tuple(float(x) for x in b), tail=tail)

    @classmethod
    def free(cls) -> CoefficientFamily:
        return cls.explicit([1.0], [0.0])

    def stabilized(self, N: int) -> CoefficientFamily:
        """The family of the matrix with entries frozen at ``(a_N, b_N)`` from row N on."""
        a, b = coeff_arrays(self, N)
        return CoefficientFamily.explicit(a[1:], b[1:])

    def with_perturbations(self, p: Perturbation, q: Perturbation) -> CoefficientFamily:
        return replace(self, p=p, q=q)


@dataclass(frozen=True)
class CoefficientPair:
    a: float
    b: float
    n: int


def _table_values(table: tuple[float, ...], n: np.ndarray) -> np.ndarray:
    tab = np.asarray(table)
    idx = np.minimum(n.astype(np.int64) - 1, tab.size - 1)
    return tab[idx]


def coeff_values(family: CoefficientFamily, n) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``(a_n, b_n)`` for an array of indices ``n >= 1`` (unchecked)."""
    n = np.asarray(n, dtype=float)
    if family.kind is Kind.CRITICAL:
        base = n ** family.alpha
        return base + family.p.values(n), -2.0 * base + family.q.values(n)
    if family.kind is Kind.NONCRITICAL:
        a = n ** family.beta
        return a, 2.0 * family.d * a
    return _table_values(family.a_table, n), _table_values(family.b_table, n)


def coeff_arrays(family: CoefficientFamily, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Entries for rows ``0 .. n_max`` with ``a[0] = 1``, ``b[0] = 0``.

    Raises :class:`NonPositiveEntry` if some ``a_n <= 0`` in range.
    """
    n = np.arange(n_max + 1, dtype=float)
    n[0] = 1.0
    a, b = coeff_values(family, n)
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    a[0], b[0] = 1.0, 0.0
    bad = np.flatnonzero(a[1:] <= 0)
    if bad.size:
        k = int(bad[0]) + 1
        raise NonPositiveEntry(f"a_{k} = {a[k]!r} is not positive")
    return a, b


def coeffs(family: CoefficientFamily, n: int) -> CoefficientPair:
    if n < 1:
        raise ValueError("n must be >= 1")
    a, b = coeff_values(family, np.array([n]))
    a, b = float(a[0]), float(b[0])
    if not a > 0:
        raise NonPositiveEntry(f"a_{n} = {a!r} is not positive")
    return CoefficientPair(a, b, n)


@dataclass(frozen=True)
class CarlemanReport:
    horizon: int
    partial_sum: float
    last_block: float
    previous_block: float
    growing: bool


def carleman_divergence_check(family: CoefficientFamily, horizon: int,
                              ratio: float = 0.9) -> CarlemanReport:
    """Partial sum of ``1/a_n`` up to ``horizon`` plus a growth flag.

    ``growing`` compares the contributions of the last two dyadic blocks
    ``(h/4, h/2]`` and ``(h/2, h]``: a divergent ``sum 1/n^s`` (``s <= 1``)
    has non-shrinking blocks, a convergent one shrinks them by ``2^(1-s)``.
    The flag is evidence only.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    a, _ = coeff_arrays(family, horizon)
    inv = 1.0 / a[1:]
    total = math.fsum(inv)
    h2, h4 = horizon // 2, horizon // 4
    last = math.fsum(inv[h2:])
    prev = math.fsum(inv[h4:h2])
    growing = bool(prev == 0.0 or last >= ratio * prev)
    return CarlemanReport(horizon, total, last, prev, growing)


@dataclass(frozen=True)
class PolyPair:
    p: complex
    q: complex
    n: int


@dataclass
class PolyTable:
    """``P_n``, ``Q_n`` for ``n = 0 .. n_max + 1`` (index 0 is the formal ``a_0 = 1`` value).

    In scaled mode the value at ``n`` is ``p[n] * exp(log_p[n])`` (same for q).
    """

    lam: complex
    p: np.ndarray
    q: np.ndarray
    log_p: np.ndarray
    log_q: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @property
    def n_max(self) -> int:
        return self.p.size - 2

    def __len__(self):
        return self.n_max + 1

    def __getitem__(self, n: int) -> PolyPair:
        if not 1 <= n <= self.n_max + 1:
            raise IndexError(n)
        return PolyPair(self.P(n), self.Q(n), n)

    def P(self, n=None):
        if n is None:
            return self.p * np.exp(self.log_p)
        return self.p[n] * np.exp(self.log_p[n])

    def Q(self, n=None):
        if n is None:
            return self.q * np.exp(self.log_q)
        return self.q[n] * np.exp(self.log_q[n])

    def wronskian(self, n) -> np.ndarray:
        """``a_n (P_n Q_{n+1} - P_{n+1} Q_n)`` evaluated scale-aware."""
        n = np.asarray(n)
        s1 = self.log_p[n] + self.log_q[n + 1]
        s2 = self.log_p[n + 1] + self.log_q[n]
        ref = np.maximum(s1, s2)
        t = (self.p[n] * self.q[n + 1] * np.exp(s1 - ref)
             - self.p[n + 1] * self.q[n] * np.exp(s2 - ref))
        return self.a[n] * t * np.exp(ref)


def orthopoly(family: CoefficientFamily, lam: complex, n_max: int,
              threshold: float = DEFAULT_SCALE_THRESHOLD) -> PolyTable:
    """First- and second-kind polynomials at ``lam`` up to ``n_max + 1``.

    ``P_1 = 1``, ``P_2 = (lam - b_1)/a_1``, ``Q_1 = 0``, ``Q_2 = 1/a_1``.
    Renormalization kicks in only when a value exceeds ``threshold``
    (pass ``np.inf`` to disable it).
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    a, b = coeff_arrays(family, n_max + 1)
    lam = complex(lam)
    p, lp = _kernels.forward(lam, a, b, 0j, 1.0 + 0j, 1, n_max + 1, threshold)
    q, lq = _kernels.forward(lam, a, b, -1.0 + 0j, 0j, 1, n_max + 1, threshold)
    return PolyTable(lam, p, q, lp, lq, a, b)


@dataclass(frozen=True)
class TransferMatrix:
    """``B_n(lam)`` acting on ``(u_{n-1}, u_n)``."""

    m: np.ndarray
    n: int

    @property
    def det(self) -> complex:
        m = self.m
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]

    def apply(self, u_prev, u_cur):
        out = self.m @ np.array([u_prev, u_cur], dtype=complex)
        return out[0], out[1]


def transfer_matrix(family: CoefficientFamily, n: int, lam: complex) -> TransferMatrix:
    if n < 2:
        raise ValueError("transfer matrices start at n = 2")
    prev, cur = coeffs(family, n - 1), coeffs(family, n)
    m = np.array([[0.0, 1.0],
                  [-prev.a / cur.a, (lam - cur.b) / cur.a]], dtype=complex)
    return TransferMatrix(m, n)


def wronskian(u_n, u_n1, v_n, v_n1, a_n):
    """``a_n (u_n v_{n+1} - u_{n+1} v_n)``."""
    return a_n * (u_n * v_n1 - u_n1 * v_n)


def recurrence_residual(a, b, lam, u, n):
    """Relative residual of the eigenvector equation at rows ``n`` (array).

    ``u`` holds plain values indexed by row; the normalization is the sum of
    the absolute values of the three terms.
    """
    n = np.asarray(n)
    lhs = a[n - 1] * u[n - 1] + (b[n] - lam) * u[n] + a[n] * u[n + 1]
    scale = (np.abs(a[n - 1] * u[n - 1]) + np.abs(a[n] * u[n + 1])
             + np.abs((b[n] - lam) * u[n]))
    return np.abs(lhs) / np.where(scale > 0, scale, 1.0)


def arg_jumps(values) -> np.ndarray:
    """Absolute argument change between consecutive entries of a complex sequence."""
    v = np.asarray(values, dtype=complex)
    return np.abs(np.angle(v[1:] / v[:-1]))
