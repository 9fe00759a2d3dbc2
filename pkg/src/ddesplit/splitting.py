"""The two split flows with their resolvents, composed into splitting schemes.

The delay generator is split as ``G = A1 + A2`` with ``A1 = diag(B, 0)``
(the undelayed flow, history frozen) and ``A2`` the pure delay equation
``v' = Phi v_t`` together with the history transport ``d/dsigma``.

* ``step_T1`` / ``step_T2`` are the sub-flows over one step ``h``; ``h``
  must be a whole number of history cells so the shift is an index rotation.
* the ``resolvent_*`` functions solve
  ``(I - h A) z = w`` with the history reconstructed from the exponential
  formula ``f(s) = exp(s/h) x + (1/h) int_s^0 exp((s - r)/h) g(r) dr``.
* the ``*_split`` functions compose sub-flows or resolvents, and
  ``crandall_liggett_apply`` iterates the full resolvent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import _backend
from .errors import GridError, NumericalError
from .kernel import DelayKernel, _apply
from .state import DelayState, shift_append

SCHEMES = ("sequential", "lie_resolvent", "crandall_liggett")


@dataclass(frozen=True)
class SplitScheme:
    kind: str = "sequential"
    h: float = 0.1
    substeps: int = 4
    fixed_point_tol: float = 1e-12
    fixed_point_max_iter: int = 200

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown scheme {self.kind!r}; choose from {SCHEMES}")
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if not self.fixed_point_tol > 0:
            raise ValueError("fixed_point_tol must be positive")

    @property
    def m(self) -> int:
        """History resolution tied to the step, ``m = 1/h``."""
        return aligned_m(self.h)

    def run(self, x0, gen, kernel, steps):
        return run_scheme(self.kind, x0, gen, kernel, steps * self.h, steps,
                          substeps=self.substeps, tol=self.fixed_point_tol,
                          max_iter=self.fixed_point_max_iter)


def aligned_m(h, tol=1e-9) -> int:
    """``1/h`` as an integer, or :class:`GridError` if ``h`` is not ``1/m``."""
    m = int(round(1.0 / h))
    if m < 1 or abs(m * h - 1.0) > tol:
        raise GridError(f"step h = {h} is not the reciprocal of an integer")
    return m


def _check_step(state, h):
    """Number of history cells in one step; ``h`` must be a multiple of ``1/m``."""
    if h is None:
        return state.history.dsigma, 1
    k = int(round(h * state.m))
    if k < 1 or abs(h * state.m - k) > 1e-9:
        raise GridError(f"step h = {h} is not a multiple of the history spacing 1/{state.m}")
    if k > state.m:
        raise GridError(f"step h = {h} exceeds the delay interval")
    return float(h), k


# -- exact sub-flows -----------------------------------------------------------

def step_T1(state: DelayState, gen, h: float) -> DelayState:
    """Advance the head by ``exp(hB)``; the history is left untouched."""
    if h < 0:
        raise ValueError("h must be non-negative")
    if h == 0:
        return state
    return state.replace(head=gen.semigroup_apply(h, state.head))


def step_T2(state: DelayState, kernel: DelayKernel, h: float = None, substeps: int = 4) -> DelayState:
    """Integrate ``v' = Phi v_t`` over ``h = k / m`` and shift the history by ``k`` cells.

    ``v_s(sigma)`` is the stored history for ``s + sigma <= 0`` and the
    within-step solution for ``s + sigma > 0``. Each history cell is covered by
    ``substeps`` classical RK4 steps; the history between nodes is linear. The
    density contributes ``sum_j W_j v_s(sigma_j)``; its node at ``sigma = 0``
    is the current stage value, so the self-reference enters the RK stages
    directly.
    """
    h, cells = _check_step(state, h)
    kernel.check_dim(state.n)
    m = state.m
    ds = 1.0 / m
    g = kernel.g
    w = kernel.density_weights(m)
    # buffer of the old history followed by the values produced in this step
    buf = np.empty((m + 1 + cells, state.n))
    buf[: m + 1] = state.history.samples
    scalar_w = w is not None and w.ndim == 1
    if w is not None:
        top = float(w[m]) if scalar_w else w[m]

    def window(c):
        lo, hi = buf[c:c + m], buf[c + 1:c + m + 1]
        if scalar_w:
            return w[:m] @ lo, w[:m] @ hi
        return np.einsum("jab,jb->a", w[:m], lo), np.einsum("jab,jb->a", w[:m], hi)

    def rhs(c, theta, v, p0, p1):
        start = state.head if c == 0 else buf[m + c]
        acc = np.zeros(state.n)
        if w is not None:
            acc = (1.0 - theta) * p0 + theta * p1 + _apply(top, v)
        for sig, coef in kernel.atoms:
            pos = (sig + 1.0) * m + c + theta
            if pos <= m + c + 1e-12:
                j = min(int(np.floor(pos + 1e-12)), m + c - 1)
                q = pos - j
                if abs(q) < 1e-12:
                    q = 0.0
                val = buf[j] if q == 0.0 else (1.0 - q) * buf[j] + q * buf[j + 1]
            else:
                val = start + ((pos - m - c) / theta) * (v - start)
            acc = acc + _apply(coef, val)
        return g(acc)

    v = state.head.copy()
    dt = ds / substeps
    for c in range(cells):
        p0, p1 = window(c) if w is not None else (None, None)
        for q in range(substeps):
            t0, tm, t1 = q / substeps, (q + 0.5) / substeps, (q + 1) / substeps
            k1 = rhs(c, t0, v, p0, p1)
            k2 = rhs(c, tm, v + 0.5 * dt * k1, p0, p1)
            k3 = rhs(c, tm, v + 0.5 * dt * k2, p0, p1)
            k4 = rhs(c, t1, v + dt * k3, p0, p1)
            v = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        buf[m + 1 + c] = v
    return shift_append(state, buf[m + 1:])


def iterate_sequential(x0, gen, kernel, h, k, substeps=4) -> Iterator[DelayState]:
    """Yield the states after each of ``k`` steps of ``T1(h) T2(h)``."""
    state = x0
    for _ in range(k):
        state = step_T1(step_T2(state, kernel, h, substeps), gen, h)
        yield state


def sequential_split(x0, gen, kernel, h, k, substeps=4) -> DelayState:
    """``(T1(h) T2(h))^k (x, f)``; project with ``.head`` for the split solution."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0:
        return x0
    _check_step(x0, h)
    state = x0
    for state in iterate_sequential(x0, gen, kernel, h, k, substeps):
        pass
    return state


# -- resolvents --------------------------------------------------------------

def _exp_weights(r):
    """Cell weights of the exponential recursion for ratio ``r = dsigma/h``."""
    if r < 1e-3:
        w_hi = r / 2 - r ** 2 / 3 + r ** 3 / 8 - r ** 4 / 30
    else:
        w_hi = (-np.expm1(-r) - r * np.exp(-r)) / r
    return np.exp(-r), -np.expm1(-r) - w_hi, w_hi


def resolvent_history(samples, h):
    """History part of ``(I - h d/dsigma)^{-1}`` on the grid.

    Returns ``(particular, profile)`` such that the resolvent history is
    ``profile[:, None] * x + particular`` for head value ``x``:
    ``profile = exp(sigma/h)`` and ``particular`` is the exponentially
    weighted integral of the data, accumulated from ``sigma = 0`` downward
    with the data linear between nodes.
    """
    samples = np.ascontiguousarray(samples, dtype=float)
    m = samples.shape[0] - 1
    decay, w_lo, w_hi = _exp_weights(1.0 / (m * h))
    part = _backend.core.exp_recursion(samples, decay, w_lo, w_hi)
    profile = np.exp(np.linspace(-1.0, 0.0, m + 1) / h)
    return part, profile


def _head_problem(state, kernel, h):
    kernel.check_dim(state.n)
    part, profile = resolvent_history(state.history.samples, h)
    lf = kernel.linear_part(part)
    kh = kernel.linear_profile(profile)
    return part, profile, lf, kh


def _assemble(state, part, profile, x):
    samples = profile[:, None] * x[None, :] + part
    samples[-1] = x
    return state.replace(head=x, samples=samples)


def _picard(update, x, tol, max_iter):
    for _ in range(max_iter):
        x_new = update(x)
        if not np.all(np.isfinite(x_new)):
            raise NumericalError("fixed-point iteration produced non-finite values")
        if np.linalg.norm(x_new - x) <= tol * max(1.0, np.linalg.norm(x_new)):
            return x_new
        x = x_new
    raise NumericalError(f"fixed-point iteration did not converge in {max_iter} iterations")


def _check_contraction(kernel, h):
    factor = h * kernel.beta * kernel.tau(0.0)
    if factor >= 1:
        raise ValueError(f"h*beta*tau(0) = {factor:.4g} >= 1: fixed-point map is not a contraction")


def resolvent_A1(state: DelayState, gen, h: float) -> DelayState:
    """``(I - h A1)^{-1}``: resolvent of ``B`` on the head, identity on the history."""
    return state.replace(head=gen.resolvent_B(h, state.head))


def resolvent_A2(state: DelayState, kernel: DelayKernel, h: float,
                 tol: float = 1e-12, max_iter: int = 200) -> DelayState:
    """Solve ``(I - h A2)(x, f) = (y, g)``.

    The head solves ``x = y + h Phi(f)`` with ``f`` from the exponential
    formula; linear kernels reduce to ``(I - h c K_h) x = y + h c Phi(part)``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    part, profile, lf, kh = _head_problem(state, kernel, h)
    y = state.head
    if kernel.linear:
        c = kernel.g.scale
        rhs = y + h * c * lf
        if np.ndim(kh) == 0:
            den = 1.0 - h * c * kh
            if den == 0:
                raise NumericalError("I - h K_h is singular")
            x = rhs / den
        else:
            a = np.eye(state.n) - h * c * kh
            try:
                x = np.linalg.solve(a, rhs)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(str(exc)) from None
    else:
        _check_contraction(kernel, h)
        x = _picard(lambda z: y + h * kernel.g(_apply(kh, z) + lf), y.copy(), tol, max_iter)
    return _assemble(state, part, profile, x)


def resolvent_G(state: DelayState, gen, kernel: DelayKernel, h: float,
                tol: float = 1e-12, max_iter: int = 200) -> DelayState:
    """Solve ``(I - h G)(x, f) = (y, g)`` for the full delay generator."""
    if h <= 0:
        raise ValueError("h must be positive")
    if h * gen.alpha >= 1:
        raise NumericalError(f"h*alpha = {h * gen.alpha} >= 1")
    part, profile, lf, kh = _head_problem(state, kernel, h)
    y = state.head
    if kernel.linear:
        c = kernel.g.scale
        x = gen.solve(h, y + h * c * lf, extra=h * c * kh)
    else:
        _check_contraction(kernel, h)
        x = _picard(lambda z: gen.solve(h, y + h * kernel.g(_apply(kh, z) + lf)),
                    y.copy(), tol, max_iter)
    return _assemble(state, part, profile, x)


def iterate_lie(x0, gen, kernel, t, n, tol=1e-12, max_iter=200) -> Iterator[DelayState]:
    lam = t / n
    state = x0
    for _ in range(n):
        state = resolvent_A1(resolvent_A2(state, kernel, lam, tol, max_iter), gen, lam)
        yield state


def iterate_crandall_liggett(x0, gen, kernel, t, n, tol=1e-12, max_iter=200) -> Iterator[DelayState]:
    lam = t / n
    state = x0
    for _ in range(n):
        state = resolvent_G(state, gen, kernel, lam, tol, max_iter)
        yield state


def _last(x0, it):
    state = x0
    for state in it:
        pass
    return state


def lie_split(x0, gen, kernel, t, n, tol=1e-12, max_iter=200) -> DelayState:
    """``[(I - (t/n) A1)^{-1} (I - (t/n) A2)^{-1}]^n (x, f)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if t == 0:
        return x0
    return _last(x0, iterate_lie(x0, gen, kernel, t, n, tol, max_iter))


def crandall_liggett_apply(x0, gen, kernel, t, n, tol=1e-12, max_iter=200) -> DelayState:
    """``(I - (t/n) G)^{-n} (x, f)``, the implicit Euler approximation of ``T(t)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if t == 0:
        return x0
    return _last(x0, iterate_crandall_liggett(x0, gen, kernel, t, n, tol, max_iter))


def iterate_scheme(kind, x0, gen, kernel, t, steps, substeps=4, tol=1e-12, max_iter=200):
    """Per-step states of any scheme; ``steps`` steps of size ``t/steps``."""
    if kind == "sequential":
        h = t / steps
        _check_step(x0, h)
        return iterate_sequential(x0, gen, kernel, h, steps, substeps)
    if kind == "lie_resolvent":
        return iterate_lie(x0, gen, kernel, t, steps, tol, max_iter)
    if kind == "crandall_liggett":
        return iterate_crandall_liggett(x0, gen, kernel, t, steps, tol, max_iter)
    raise ValueError(f"unknown scheme {kind!r}")


def run_scheme(kind, x0, gen, kernel, t, steps, substeps=4, tol=1e-12, max_iter=200):
    if steps == 0 or t == 0:
        return x0
    return _last(x0, iterate_scheme(kind, x0, gen, kernel, t, steps, substeps, tol, max_iter))
