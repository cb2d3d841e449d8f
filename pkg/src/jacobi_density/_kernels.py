"""Compiled three-term recurrence loops.

Arrays ``a`` and ``b`` are indexed by the matrix row ``n`` (``a[0]`` is the
formal ``a_0 = 1``).  Values are kept as mantissa/log-scale pairs: the
sequence value at ``n`` is ``mant[n] * exp(logs[n])``.  Renormalization only
happens when a mantissa exceeds ``threshold``, so for moderate values
``logs`` stays identically zero and ``mant`` holds the plain numbers.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def forward(lam, a, b, u_prev, u_cur, n0, n_end, threshold):
    """Run ``a_{n-1}u_{n-1} + b_n u_n + a_n u_{n+1} = lam u_n`` upward.

    ``u_prev``/``u_cur`` are the values at ``n0 - 1`` and ``n0``; the loop
    fills indices ``n0 + 1 .. n_end``.
    """
    mant = np.zeros(n_end + 1, np.complex128)
    logs = np.zeros(n_end + 1)
    mant[n0 - 1] = u_prev
    mant[n0] = u_cur
    x0 = u_prev
    x1 = u_cur
    shift = 0.0
    for n in range(n0, n_end):
        x2 = ((lam - b[n]) * x1 - a[n - 1] * x0) / a[n]
        s = abs(x2)
        if s > threshold:
            x0 /= s
            x1 /= s
            x2 /= s
            shift += np.log(s)
        mant[n + 1] = x2
        logs[n + 1] = shift
        x0 = x1
        x1 = x2
    return mant, logs


@njit(cache=True)
def backward(lam, a, b, u_prev, u_cur, n_seed, threshold):
    """Run the same recurrence downward from the pair at ``n_seed - 1, n_seed``.

    Fills indices ``0 .. n_seed``; index 0 uses ``a_0 = 1`` so that
    ``u_0 = (lam - b_1) u_1 - a_1 u_2``.
    """
    mant = np.zeros(n_seed + 1, np.complex128)
    logs = np.zeros(n_seed + 1)
    mant[n_seed] = u_cur
    mant[n_seed - 1] = u_prev
    x2 = u_cur
    x1 = u_prev
    shift = 0.0
    for n in range(n_seed - 1, 0, -1):
        x0 = ((lam - b[n]) * x1 - a[n] * x2) / a[n - 1]
        s = abs(x0)
        if s > threshold:
            x0 /= s
            x1 /= s
            x2 /= s
            shift += np.log(s)
        mant[n - 1] = x0
        logs[n - 1] = shift
        x2 = x1
        x1 = x0
    return mant, logs


@njit(cache=True)
def volterra_backsub(lam, rem):
    """Backward substitution for ``x = e_- - sum_{k>=n} diag(prod 1/lam^2, 1) lam_k R_k x_k``.

    ``lam`` has length K, ``rem`` shape (K, 2, 2); entry ``j`` refers to the
    index ``start + j``.  Returns the K + 1 vectors for ``start .. start + K``
    (the last one is ``e_-`` exactly).
    """
    K = lam.shape[0]
    out = np.zeros((K + 1, 2), np.complex128)
    out[K, 1] = 1.0
    t0 = 0.0 + 0.0j
    t1 = 0.0 + 0.0j
    for j in range(K - 1, -1, -1):
        lj = lam[j]
        f = 1.0 / (lj * lj)
        r00 = lj * rem[j, 0, 0]
        r01 = lj * rem[j, 0, 1]
        r10 = lj * rem[j, 1, 0]
        r11 = lj * rem[j, 1, 1]
        # (I + D R') x = e_- - D T_{n+1},  D = diag(f, 1)
        m00 = 1.0 + f * r00
        m01 = f * r01
        m10 = r10
        m11 = 1.0 + r11
        rhs0 = -f * t0
        rhs1 = 1.0 - t1
        det = m00 * m11 - m01 * m10
        x0 = (rhs0 * m11 - m01 * rhs1) / det
        x1 = (m00 * rhs1 - m10 * rhs0) / det
        out[j, 0] = x0
        out[j, 1] = x1
        # T_n = D (R' x_n + T_{n+1})
        t0 = f * (r00 * x0 + r01 * x1 + t0)
        t1 = r10 * x0 + r11 * x1 + t1
    return out
