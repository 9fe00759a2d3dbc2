"""Pure-Python fallback for the compiled inner loops in ``_core.pyx``.

Each function has the same signature and semantics as its compiled twin,
so either module can be swapped in by ``_backend``.
"""

import numpy as np


def exp_recursion(g, decay, w_lo, w_hi):
    """Backward recursion ``out[j] = decay*out[j+1] + w_lo*g[j] + w_hi*g[j+1]``.

    ``out[-1]`` is zero. This is the cell-by-cell accumulation of
    ``(1/h) * int_s^0 exp((s - r)/h) g(r) dr`` for piecewise-linear ``g``.
    """
    g = np.asarray(g, dtype=float)
    out = np.zeros_like(g)
    for j in range(g.shape[0] - 2, -1, -1):
        out[j] = decay * out[j + 1] + w_lo * g[j] + w_hi * g[j + 1]
    return out


def thomas(sub, diag, sup, rhs):
    """Tridiagonal solve with several right-hand sides (columns of ``rhs``).

    ``sub[0]`` and ``sup[-1]`` are ignored. No pivoting.
    """
    n = diag.shape[0]
    rhs = np.asarray(rhs, dtype=float)
    cp = np.empty(n)
    x = np.empty_like(rhs)
    denom = diag[0]
    if denom == 0.0:
        raise ZeroDivisionError("zero pivot in tridiagonal solve")
    cp[0] = sup[0] / denom
    x[0] = rhs[0] / denom
    for i in range(1, n):
        denom = diag[i] - sub[i] * cp[i - 1]
        if denom == 0.0:
            raise ZeroDivisionError("zero pivot in tridiagonal solve")
        cp[i] = sup[i] / denom
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / denom
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return x


def hermite_midpoint_sum(U, D, W, start, delta, last_linear):
    """Weighted sum of cell-midpoint values of a dense trajectory buffer.

    Cell ``a = start + j`` spans rows ``a`` and ``a + 1``. Cells whose right
    end is at or before row ``last_linear`` are interpolated linearly, the
    rest by cubic Hermite using the derivative rows in ``D``.
    """
    count = W.shape[0]
    lo = U[start:start + count]
    hi = U[start + 1:start + count + 1]
    mid = 0.5 * (lo + hi)
    n_lin = min(max(last_linear - start, 0), count)
    if n_lin < count:
        mid[n_lin:] += (delta / 8.0) * (D[start + n_lin:start + count]
                                        - D[start + n_lin + 1:start + count + 1])
    return W @ mid
