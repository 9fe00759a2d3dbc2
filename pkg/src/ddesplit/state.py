"""Elements of the history-augmented product space ``H x L^p([-1, 0]; H)``.

A :class:`DelayState` pairs a head vector ``x`` with a history segment
``f`` sampled on the uniform grid ``sigma_j = -1 + j/m``, ``j = 0..m``.
Spatial vectors are plain 1-D arrays; their norm is
``sqrt(grid_weight * sum(x**2))`` so that a finite-difference grid can stand
in for an ``L^2`` function space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionError, GridError, NonFiniteError


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def trapezoid_weights(m: int) -> np.ndarray:
    """Trapezoid weights on ``m`` equal cells of ``[-1, 0]``."""
    w = np.full(m + 1, 1.0 / m)
    w[0] = w[-1] = 0.5 / m
    return w


@dataclass(frozen=True, eq=False)
class HistorySegment:
    """Samples ``f(sigma_j)`` of a history function, shape ``(m + 1, n)``."""

    samples: np.ndarray
    p: float = 2.0

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] < 2 or s.shape[1] < 1:
            raise GridError(f"history needs shape (m+1, n) with m >= 1, got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise NonFiniteError("history samples must be finite")
        if self.p < 1:
            raise ValueError(f"norm exponent p must be >= 1, got {self.p}")
        object.__setattr__(self, "samples", _frozen(s))

    @property
    def m(self) -> int:
        return self.samples.shape[0] - 1

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def dsigma(self) -> float:
        return 1.0 / self.m

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-1.0, 0.0, self.m + 1)


@dataclass(frozen=True, eq=False)
class DelayState:
    """A point ``(x, f)`` of the product space.

    ``head_consistent`` reports whether ``f(0) == x``. Outputs of the delay
    flow and of the resolvents always are; after the pure ``B`` flow the head
    has moved on while the history has not, which is expected.
    """

    head: np.ndarray
    history: HistorySegment
    grid_weight: float = 1.0

    def __post_init__(self):
        x = np.array(self.head, dtype=float).reshape(-1)
        if x.size < 1:
            raise ValueError("head must be a non-empty vector")
        if not np.all(np.isfinite(x)):
            raise NonFiniteError("head must be finite")
        if x.size != self.history.n:
            raise DimensionError(
                f"head has dimension {x.size}, history samples have {self.history.n}")
        if not self.grid_weight > 0:
            raise ValueError("grid_weight must be positive")
        object.__setattr__(self, "head", _frozen(x))

    @property
    def n(self) -> int:
        return self.head.size

    @property
    def m(self) -> int:
        return self.history.m

    @property
    def p(self) -> float:
        return self.history.p

    @property
    def head_consistent(self) -> bool:
        return bool(np.array_equal(self.history.samples[-1], self.head))

    def replace(self, head=None, samples=None) -> "DelayState":
        head = self.head if head is None else head
        samples = self.history.samples if samples is None else samples
        return DelayState(head, HistorySegment(samples, self.history.p), self.grid_weight)

    def _check_compatible(self, other: "DelayState"):
        if self.history.samples.shape != other.history.samples.shape:
            raise GridError(
                f"grid mismatch: {self.history.samples.shape} vs {other.history.samples.shape}")

    def __add__(self, other: "DelayState") -> "DelayState":
        self._check_compatible(other)
        return self.replace(self.head + other.head, self.history.samples + other.history.samples)

    def __sub__(self, other: "DelayState") -> "DelayState":
        self._check_compatible(other)
        return self.replace(self.head - other.head, self.history.samples - other.history.samples)

    def __mul__(self, c: float) -> "DelayState":
        return self.replace(c * self.head, c * self.history.samples)

    __rmul__ = __mul__


def make_state(head, history_fn: Callable[[float], Sequence[float]], m: int,
               grid_weight: float = 1.0, p: float = 2.0) -> DelayState:
    """Sample ``history_fn`` on the grid with ``m`` cells and attach ``head``."""
    if m < 1:
        raise GridError(f"m must be >= 1, got {m}")
    head = np.atleast_1d(np.asarray(head, dtype=float))
    nodes = np.linspace(-1.0, 0.0, m + 1)
    rows = [np.atleast_1d(np.asarray(history_fn(s), dtype=float)) for s in nodes]
    if any(r.shape != head.shape for r in rows):
        raise DimensionError(
            f"history_fn returned shape {rows[0].shape}, head has shape {head.shape}")
    return DelayState(head, HistorySegment(np.vstack(rows), p), grid_weight)


def shift_append(state: DelayState, new_tail) -> DelayState:
    """Drop the ``k`` oldest samples and append ``new_tail`` at the young end.

    The head becomes the last element of ``new_tail``. An empty tail returns
    ``state`` unchanged.
    """
    tail = np.asarray(new_tail, dtype=float)
    if tail.size == 0:
        return state
    tail = tail.reshape(-1, state.n) if tail.ndim != 2 else tail
    if tail.shape[1] != state.n:
        raise DimensionError(f"tail rows have dimension {tail.shape[1]}, state has {state.n}")
    k = tail.shape[0]
    if k > state.m:
        raise GridError(f"cannot shift by {k} samples on a grid with m = {state.m}")
    samples = np.concatenate([state.history.samples[k:], tail])
    return state.replace(tail[-1].copy(), samples)


def interpolate_history(history: HistorySegment, sigma: float) -> np.ndarray:
    """Piecewise-linear value of the history at ``sigma`` in ``[-1, 0]``."""
    if not -1.0 - 1e-12 <= sigma <= 1e-12:
        raise GridError(f"sigma = {sigma} outside [-1, 0]")
    pos = (min(max(sigma, -1.0), 0.0) + 1.0) * history.m
    if abs(pos - round(pos)) < 1e-9:
        pos = float(round(pos))
    j = min(int(np.floor(pos)), history.m - 1)
    theta = pos - j
    f = history.samples
    if theta == 0.0:
        return f[j].copy()
    return (1.0 - theta) * f[j] + theta * f[j + 1]


def regrid(state: DelayState, m: int) -> DelayState:
    """Resample the history of ``state`` onto a grid with ``m`` cells."""
    if m == state.m:
        return state
    nodes = np.linspace(-1.0, 0.0, m + 1)
    samples = np.vstack([interpolate_history(state.history, s) for s in nodes])
    return state.replace(samples=samples)


def spatial_norm(x, grid_weight: float = 1.0) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(grid_weight * np.dot(x, x)))


def row_norms(f, grid_weight: float = 1.0) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    return np.sqrt(grid_weight * np.einsum("ij,ij->i", f, f))


def history_norm(history: HistorySegment, grid_weight: float = 1.0,
                 weight: Optional[np.ndarray] = None, p: Optional[float] = None) -> float:
    """``(int ||f(sigma)||^p w(sigma) dsigma)^(1/p)`` by the trapezoid rule."""
    p = history.p if p is None else p
    vals = row_norms(history.samples, grid_weight) ** p
    if weight is not None:
        vals = vals * weight
    return float(np.dot(trapezoid_weights(history.m), vals) ** (1.0 / p))


def _weight_samples(weight, nodes):
    if weight is None:
        return None
    w = np.asarray(weight(nodes), dtype=float) if callable(weight) else np.asarray(weight, float)
    if w.shape != nodes.shape:
        w = np.array([float(weight(s)) for s in nodes])
    if np.any(w < 0):
        raise ValueError("norm weight must be non-negative")
    return w


def e_norm(state: DelayState, weight=None, p: Optional[float] = None) -> float:
    """Product-space norm ``(||x||^p + int ||f||^p w)^(1/p)``.

    Parameters
    ----------
    state : DelayState
    weight : callable or array, optional
        Weight ``w(sigma) >= 0`` on the history grid, e.g. the total variation
        profile of a kernel for the dissipativity norm. ``None`` means ``w = 1``.
    p : float, optional
        Norm exponent, defaults to the history's own ``p``.
    """
    p = state.p if p is None else float(p)
    if p < 1:
        raise ValueError(f"norm exponent p must be >= 1, got {p}")
    w = _weight_samples(weight, state.history.nodes)
    hx = spatial_norm(state.head, state.grid_weight)
    hist = history_norm(state.history, state.grid_weight, w, p)
    return float((hx ** p + hist ** p) ** (1.0 / p))


def d_norm(state: DelayState, gen) -> float:
    """Regularity norm ``||x||_B + ||Bx||_B + ||f||_{W^{1,p}(D(B))} + Lip(f)``.

    ``||y||_B = ||y|| + ||By||``. The derivative of the history uses centred
    differences inside and one-sided differences at the ends; the Lipschitz
    seminorm is the largest difference quotient between neighbouring nodes.
    Diagnostic only.
    """
    gw, p = state.grid_weight, state.p
    f = state.history.samples
    ds = state.history.dsigma

    def graph(rows):
        rows = np.atleast_2d(rows)
        return row_norms(rows, gw) + row_norms(gen.apply_B(rows), gw)

    x = state.head
    bx = gen.apply_B(x)
    head_part = graph(x)[0] + graph(bx)[0]
    fprime = np.gradient(f, ds, axis=0)
    tw = trapezoid_weights(state.m)
    w1p = (np.dot(tw, graph(f) ** p) + np.dot(tw, graph(fprime) ** p)) ** (1.0 / p)
    lip = float(np.max(row_norms(np.diff(f, axis=0), gw)) / ds)
    return float(head_part + w1p + lip)
