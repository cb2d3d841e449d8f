"""Sequence acceleration used by every route that takes a limit numerically."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Extrapolated:
    value: complex | float
    uncertainty: float
    tableau: tuple


def richardson(values, ratio: float, exponents) -> Extrapolated:
    """Richardson elimination of known error powers.

    ``values[k]`` is the approximation at step ``h_k = h_0 / ratio**k`` and
    the error expands as ``sum_j c_j h^exponents[j]``.  Each column of the
    tableau removes one exponent; the uncertainty is the spread between the
    final entry and the last entry of the previous column.
    """
    cols = [list(values)]
    for e in exponents:
        prev = cols[-1]
        if len(prev) < 2:
            break
        f = ratio ** e
        cols.append([(f * prev[k + 1] - prev[k]) / (f - 1.0) for k in range(len(prev) - 1)])
    best = cols[-1][-1]
    unc = abs(best - cols[-2][-1]) if len(cols) > 1 else float("inf")
    return Extrapolated(best, float(unc), tuple(tuple(c) for c in cols))


def aitken(values) -> Extrapolated:
    """Shanks/Aitken delta-squared limit of a geometrically converging sequence.

    Needs three terms; falls back to the last term when the differences do
    not contract (oscillating or already converged to rounding).  The
    uncertainty is the larger of ``|limit - last|`` and the size of the
    correction that was applied.
    """
    v = list(values)
    if len(v) < 3:
        last = v[-1]
        unc = abs(v[-1] - v[-2]) if len(v) == 2 else float("inf")
        return Extrapolated(last, float(unc), (tuple(v),))
    x0, x1, x2 = v[-3], v[-2], v[-1]
    d1, d2 = x1 - x0, x2 - x1
    denom = d1 - d2
    rate = (d2 / d1) if d1 != 0 else 0.0
    contracting = d1 != 0 and denom != 0 and abs(rate) < 0.95 and np.real(rate) > 0
    if not contracting:
        return Extrapolated(x2, float(abs(d2)), (tuple(v),))
    limit = x2 + d2 * d2 / denom
    # spread against the previous triple when available
    unc = abs(limit - x2)
    if len(v) >= 4:
        prev = aitken(v[:-1])
        unc = max(unc, abs(limit - prev.value))
    return Extrapolated(limit, float(unc), (tuple(v), (limit,)))
