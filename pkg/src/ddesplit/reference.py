"""Unsplit reference solutions.

:func:`reference_solve` integrates ``u' = Bu + Phi u_t`` on a dense time grid
``delta = dsigma / refine`` with the integrating-factor (Lawson) form of
classical RK4: ``B`` is propagated exactly through ``exp(delta B)`` and the
delay term is treated explicitly. Delayed values come from a rolling buffer
of the whole trajectory with cubic Hermite dense output (the initial history
is linear between its samples). Integer times are grid points, so no step
straddles a breaking point of the solution.

:func:`exact_scalar_oracle` evaluates ``u' = a u(t) + b u(t - 1)`` with
constant history by the method of steps and Gauss-Legendre quadrature; it
shares no code with the integrators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import _backend
from .errors import GridError, UnsupportedParameterError
from .kernel import DelayKernel, _apply
from .state import DelayState


@dataclass(frozen=True)
class ReferenceConfig:
    refine: int = 16
    tol: float = 1e-8

    def __post_init__(self):
        if self.refine < 4:
            raise ValueError(f"refine must be >= 4, got {self.refine}")


def _grid_steps(x0, t):
    k = int(round(t * x0.m))
    if t < 0 or abs(t * x0.m - k) > 1e-9:
        raise GridError(f"t = {t} is not a multiple of the history spacing 1/{x0.m}")
    return k


def reference_solve(x0: DelayState, gen, kernel: DelayKernel, t: float,
                    config: ReferenceConfig = ReferenceConfig()) -> DelayState:
    """``T(t)(x, f) = (u(t), u_t)`` sampled back onto the grid of ``x0``."""
    kernel.check_dim(x0.n)
    if gen.n != x0.n:
        raise GridError(f"generator size {gen.n} does not match state dimension {x0.n}")
    k = _grid_steps(x0, t)
    if k == 0:
        return x0
    return _integrate(x0, gen, kernel, k, config.refine)


def self_error_estimate(x0, gen, kernel, t, config=ReferenceConfig()):
    """Richardson estimate of the reference error at ``config.refine``.

    Compares against a run at half the refinement; for a fourth-order method
    the finer run's error is about ``1/15`` of the difference. Returns the
    reference state and the estimated error in head and product norms.
    """
    from .state import e_norm, spatial_norm

    k = _grid_steps(x0, t)
    fine = _integrate(x0, gen, kernel, k, config.refine)
    coarse = _integrate(x0, gen, kernel, k, max(config.refine // 2, 1))
    d = fine - coarse
    return fine, spatial_norm(d.head, d.grid_weight) / 15.0, e_norm(d) / 15.0


def _hermite(U, D, a, q, delta, last_linear):
    if q == 0.0:
        return U[a]
    if a + 1 <= last_linear:
        return (1.0 - q) * U[a] + q * U[a + 1]
    q2, q3 = q * q, q * q * q
    return ((2 * q3 - 3 * q2 + 1) * U[a] + (q3 - 2 * q2 + q) * delta * D[a]
            + (3 * q2 - 2 * q3) * U[a + 1] + (q3 - q2) * delta * D[a + 1])


def _integrate(x0, gen, kernel, k_coarse, refine):
    m, n = x0.m, x0.n
    M = m * refine
    K = k_coarse * refine
    delta = 1.0 / M
    f = x0.history.samples

    U = np.zeros((M + K + 1, n))
    D = np.zeros_like(U)
    rows = np.arange(M + 1)
    jc = np.minimum(rows // refine, m - 1)
    th = (rows - jc * refine) / refine
    U[: M + 1] = (1.0 - th)[:, None] * f[jc] + th[:, None] * f[jc + 1]
    U[M] = x0.head

    g = kernel.g
    W = kernel.density_weights(M)
    if W is not None:
        nz = np.nonzero(np.reshape(np.abs(W[:M]), (M, -1)).sum(axis=1))[0]
        jlo, jhi = (int(nz[0]), int(nz[-1]) + 1) if nz.size else (0, 0)
        Wsub = np.ascontiguousarray(W[jlo:jhi])
        top = W[M] if W.ndim > 1 else float(W[M])
        scalar_w = W.ndim == 1
    atoms = [(s * M, c) for s, c in kernel.atoms]

    def lin(r, theta, v):
        """Linear part of ``Phi`` at time row ``r + theta`` with stage value ``v``."""
        acc = np.zeros(n)
        if W is not None:
            if jhi > jlo:
                if theta == 0.5:
                    if scalar_w:
                        acc = _backend.core.hermite_midpoint_sum(U, D, Wsub, r - M + jlo, delta, M)
                    else:
                        acc = _matrix_midpoints(U, D, Wsub, r - M + jlo, delta, M)
                else:
                    off = r - M + jlo + (1 if theta == 1.0 else 0)
                    blk = U[off: off + (jhi - jlo)]
                    acc = Wsub @ blk if scalar_w else np.einsum("jab,jb->a", Wsub, blk)
            acc = acc + _apply(top, v)
        for sM, c in atoms:
            pos = r + theta + sM
            if pos <= r + 1e-12:
                a = int(math.floor(pos + 1e-9))
                q = pos - a
                if abs(q) < 1e-9:
                    q = 0.0
                val = _hermite(U, D, a, q, delta, M)
            else:
                val = U[r] + ((pos - r) / theta) * (v - U[r])
            acc = acc + _apply(c, val)
        return acc

    half, full = 0.5 * delta, delta
    for step in range(K):
        r = M + step
        u = U[r]
        k1 = g(lin(r, 0.0, u))
        D[r] = gen.apply_B(u) + k1
        e_u, e_k1 = gen.semigroup_apply(full, np.vstack([u, k1]))
        e2_a, e2_u = gen.semigroup_apply(half, np.vstack([u + 0.5 * delta * k1, u]))
        k2 = g(lin(r, 0.5, e2_a))
        k3 = g(lin(r, 0.5, e2_u + 0.5 * delta * k2))
        e2_k3, e2_k23 = gen.semigroup_apply(half, np.vstack([k3, k2 + k3]))
        k4 = g(lin(r, 1.0, e_u + delta * e2_k3))
        U[r + 1] = e_u + (delta / 6.0) * (e_k1 + 2.0 * e2_k23 + k4)
    # derivative at the final row is not needed for the output

    out = np.empty_like(f)
    last = M + K
    for j in range(m + 1):
        row = last - (m - j) * refine
        if row <= M:
            out[j] = f[m - (M - row) // refine]
        else:
            out[j] = U[row]
    return x0.replace(head=U[last].copy(), samples=out)


def _matrix_midpoints(U, D, W, start, delta, last_linear):
    count = W.shape[0]
    lo, hi = U[start:start + count], U[start + 1:start + count + 1]
    mid = 0.5 * (lo + hi)
    n_lin = min(max(last_linear - start, 0), count)
    mid[n_lin:] += (delta / 8.0) * (D[start + n_lin:start + count]
                                    - D[start + n_lin + 1:start + count + 1])
    return np.einsum("jab,jb->a", W, mid)


_GL32 = leggauss(32)


def exact_scalar_oracle(a: float, b: float, x: float, t: float) -> float:
    """``u(t)`` for ``u' = a u + b u(t - 1)``, ``u = x`` on ``[-1, 0]``, ``0 <= t <= 3``.

    On each unit segment ``u(t) = e^{a(t-k)} u(k) + b int_k^t e^{a(t-s)} u(s-1) ds``;
    the integral is evaluated with 32-point Gauss-Legendre, recursing into the
    previous segment for ``u(s - 1)``. The integrand is smooth on every
    segment, so the result is accurate to rounding.
    """
    if t < 0 or t > 3:
        raise UnsupportedParameterError(f"oracle covers 0 <= t <= 3, got t = {t}")
    nodes, weights = _GL32
    a, b, x = float(a), float(b), float(x)

    @lru_cache(maxsize=None)
    def u(s):
        if s <= 0.0:
            return x
        k = math.ceil(s) - 1
        if s - k == 0.0:
            k -= 1
        k = max(k, 0)
        base = math.exp(a * (s - k)) * u(float(k))
        half = 0.5 * (s - k)
        total = 0.0
        for xi, wi in zip(nodes, weights):
            r = k + half * (xi + 1.0)
            total += wi * math.exp(a * (s - r)) * u(r - 1.0)
        return base + b * half * total

    return u(float(t))
