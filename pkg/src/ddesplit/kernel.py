"""The delay functional ``Phi f = g(int_{-1}^0 d eta(sigma) f(sigma))``.

``eta`` is split into point masses (atoms ``(sigma_i, C_i)``) and an
absolutely continuous part with a density supported on ``[a, b]``.
Coefficients are floats (multiples of the identity) or ``n x n`` matrices.

The density integral is computed by product integration against the
piecewise-linear interpolant of ``f``: for every grid node we precompute the
weight ``W_j = int density(s) phi_j(s) ds`` with ``phi_j`` the hat function
at that node. For a density that is constant on a grid-aligned interval these
are exactly trapezoid weights.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DimensionError, GridError, UnsupportedParameterError
from .state import HistorySegment

_GL_X, _GL_W = leggauss(8)


@dataclass(frozen=True)
class Nonlinearity:
    """Lipschitz map ``g`` applied after the integral.

    ``scale`` is set when ``g(v) = scale * v`` is linear.
    """

    name: str
    func: Callable
    beta: float
    scale: Optional[float] = None

    def __call__(self, v):
        return self.func(v)

    @property
    def linear(self):
        return self.scale is not None

    @classmethod
    def identity(cls):
        return cls("identity", lambda v: np.array(v, dtype=float, copy=True), 1.0, 1.0)

    @classmethod
    def sin(cls):
        return cls("sin", np.sin, 1.0)

    @classmethod
    def tanh(cls):
        return cls("tanh", np.tanh, 1.0)

    @classmethod
    def scaled(cls, k):
        k = float(k)
        return cls(f"scaled {k:g}", lambda v: k * np.asarray(v, dtype=float), abs(k), k)

    @classmethod
    def parse(cls, spec):
        """Builtin from ``"identity"``, ``"sin"``, ``"tanh"`` or ``"scaled k"``."""
        if isinstance(spec, Nonlinearity):
            return spec
        if isinstance(spec, dict):
            kind = spec.get("kind")
            if kind == "scaled":
                return cls.scaled(spec["k"])
            spec = kind
        parts = str(spec).split()
        if parts and parts[0] == "scaled" and len(parts) == 2:
            return cls.scaled(float(parts[1]))
        table = {"identity": cls.identity, "sin": cls.sin, "tanh": cls.tanh}
        if len(parts) != 1 or parts[0] not in table:
            raise KeyError(f"unknown nonlinearity {spec!r}")
        return table[parts[0]]()


@dataclass(frozen=True)
class Density:
    """Density of the absolutely continuous part of ``eta`` on ``[a, b]``."""

    func: Callable
    a: float = -1.0
    b: float = 0.0
    label: str = "custom"

    def __call__(self, s):
        return self.func(s)

    @classmethod
    def constant(cls, c, a=-1.0, b=0.0):
        c = float(c)
        return cls(lambda s: np.full(np.shape(s), c), a, b, f"constant {c:g}")

    @classmethod
    def linear_ramp(cls, a, b, c=1.0):
        c = float(c)
        return cls(lambda s: c * np.asarray(s, dtype=float), float(a), float(b),
                   f"linear-ramp {a:g} {b:g} {c:g}")

    @classmethod
    def parse(cls, spec):
        """``None``/``"zero"``, ``"constant c"`` or ``"linear-ramp a b [c]"`` (or dict forms)."""
        if spec is None or isinstance(spec, Density):
            return spec
        if isinstance(spec, dict):
            kind = spec.get("kind")
            if kind == "zero":
                return None
            if kind == "constant":
                return cls.constant(spec.get("c", 1.0), spec.get("a", -1.0), spec.get("b", 0.0))
            if kind == "linear-ramp":
                return cls.linear_ramp(spec["a"], spec["b"], spec.get("c", 1.0))
            raise KeyError(f"unknown density kind {kind!r}")
        parts = str(spec).split()
        if parts == ["zero"]:
            return None
        if parts and parts[0] == "constant" and len(parts) == 2:
            return cls.constant(float(parts[1]))
        if parts and parts[0] == "linear-ramp" and len(parts) in (3, 4):
            return cls.linear_ramp(*map(float, parts[1:]))
        raise KeyError(f"unknown density {spec!r}")


def spectral_norm(c, tol=1e-10, max_iter=500) -> float:
    """Operator 2-norm by power iteration on ``C^T C``; ``|c|`` for scalars."""
    if np.ndim(c) == 0:
        return abs(float(c))
    c = np.asarray(c, dtype=float)
    if not np.any(c):
        return 0.0
    v = np.ones(c.shape[1]) / np.sqrt(c.shape[1])
    lam = 0.0
    for _ in range(max_iter):
        w = c.T @ (c @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # started orthogonal to the range; restart from a fixed generic vector
            v = np.cos(np.arange(1, c.shape[1] + 1))
            v /= np.linalg.norm(v)
            continue
        v = w / nw
        if abs(nw - lam) <= tol * nw:
            lam = nw
            break
        lam = nw
    return float(np.sqrt(lam))


def _apply(c, v):
    """Coefficient times vector(s); ``v`` may be ``(n,)`` or ``(k, n)``."""
    if np.ndim(c) == 0:
        return c * v
    return v @ np.asarray(c).T


class DelayKernel:
    """Delay functional: point masses plus a density, wrapped in an outer nonlinearity.

    Parameters
    ----------
    atoms : sequence of (sigma, coefficient)
        Point masses at ``sigma in [-1, 0]``.
    density : Density or str or None
        Absolutely continuous part.
    g : Nonlinearity or str
        Outer nonlinearity with declared Lipschitz constant ``g.beta``.
    sigma0 : float, optional
        Cutoff in ``(-1, 0)``; all atoms must sit at or left of it. Defaults
        to ``min(-0.5, largest atom)`` clipped into ``(-1, 0)``.
    """

    def __init__(self, atoms=(), density=None, g="identity", sigma0=None, check_beta=True):
        self.atoms = tuple((float(s), self._coeff(c)) for s, c in atoms)
        self.density = Density.parse(density)
        self.g = Nonlinearity.parse(g)
        if not self.atoms and self.density is None:
            raise ValueError("kernel needs at least one atom or a density")
        for s, _ in self.atoms:
            if not -1.0 <= s <= 0.0:
                raise GridError(f"atom position {s} outside [-1, 0]")
        if self.density is not None:
            a, b = self.density.a, self.density.b
            if not -1.0 <= a < b <= 0.0:
                raise GridError(f"density support [{a}, {b}] not inside [-1, 0]")
        if sigma0 is None:
            top = max((s for s, _ in self.atoms), default=-1.0)
            sigma0 = max(top, -0.5)
        self.sigma0 = float(sigma0)
        if not -1.0 < self.sigma0 < 0.0:
            raise ValueError(f"sigma0 = {self.sigma0} must lie in (-1, 0)")
        for s, _ in self.atoms:
            if s > self.sigma0:
                raise ValueError(f"atom at {s} lies right of the cutoff sigma0 = {self.sigma0}")
        self.dim = self._infer_dim()
        self._weights = {}
        self._tau_nodes = {}
        if check_beta:
            self._spot_check_beta()

    @staticmethod
    def _coeff(c):
        if np.ndim(c) == 0:
            return float(c)
        c = np.array(c, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise DimensionError(f"atom coefficient must be scalar or square, got shape {c.shape}")
        c.flags.writeable = False
        return c

    def _infer_dim(self):
        dims = {np.shape(c)[0] for _, c in self.atoms if np.ndim(c) == 2}
        if self.density is not None:
            d = np.asarray(self.density(np.array([0.5 * (self.density.a + self.density.b)])))
            if d.ndim == 3:
                dims.add(d.shape[1])
        if len(dims) > 1:
            raise DimensionError(f"inconsistent coefficient sizes {sorted(dims)}")
        return dims.pop() if dims else None

    @classmethod
    def zero(cls):
        """The kernel ``Phi = 0``."""
        return cls(atoms=[(-1.0, 0.0)])

    @property
    def beta(self):
        return self.g.beta

    @property
    def linear(self):
        return self.g.linear

    @property
    def scalar(self):
        return self.dim is None

    @property
    def is_zero(self):
        return (self.density is None and all(not np.any(c) for _, c in self.atoms)) \
            or (self.g.linear and self.g.scale == 0.0)

    def describe(self):
        atoms = [[s, c if np.ndim(c) == 0 else np.asarray(c).tolist()] for s, c in self.atoms]
        dens = None
        if self.density is not None:
            dens = {"label": self.density.label, "a": self.density.a, "b": self.density.b}
        return {"atoms": atoms, "density": dens, "g": self.g.name, "beta": self.beta,
                "sigma0": self.sigma0}

    def _spot_check_beta(self, trials=32):
        rng = np.random.default_rng(12345)
        n = self.dim or 4
        worst = 0.0
        for _ in range(trials):
            a, b = rng.standard_normal((2, n)) * rng.uniform(0.01, 10)
            d = np.linalg.norm(a - b)
            if d > 0:
                worst = max(worst, np.linalg.norm(self.g(a) - self.g(b)) / d)
        if worst > self.beta * (1 + 1e-10) + 1e-14:
            warnings.warn(f"nonlinearity {self.g.name!r}: observed Lipschitz quotient "
                          f"{worst:.6g} exceeds declared beta = {self.beta}", stacklevel=3)

    def check_dim(self, n):
        if self.dim is not None and self.dim != n:
            raise DimensionError(f"kernel coefficients are {self.dim}x{self.dim}, state has n = {n}")

    # -- quadrature data ---------------------------------------------------

    def _density_at(self, s):
        s = np.asarray(s, dtype=float)
        d = np.asarray(self.density(s), dtype=float)
        if d.shape[: s.ndim] != s.shape:
            d = np.array([np.asarray(self.density(float(x)), dtype=float) for x in s.ravel()])
            d = d.reshape(s.shape + d.shape[1:])
        return d

    def density_weights(self, m):
        """Product-integration weights of the density on the grid with ``m`` cells.

        Shape ``(m + 1,)`` for scalar densities, ``(m + 1, n, n)`` otherwise.
        ``None`` if the kernel has no density. Cached per ``m``.
        """
        if self.density is None:
            return None
        w = self._weights.get(m)
        if w is not None:
            return w
        a, b = self.density.a, self.density.b
        nodes = np.linspace(-1.0, 0.0, m + 1)
        lo = np.maximum(nodes[:-1], a)
        hi = np.minimum(nodes[1:], b)
        cells = np.nonzero(hi > lo)[0]
        lo, hi = lo[cells], hi[cells]
        s = 0.5 * (hi + lo)[:, None] + 0.5 * (hi - lo)[:, None] * _GL_X
        qw = 0.5 * (hi - lo)[:, None] * _GL_W
        d = self._density_at(s)
        phi_hi = (s - nodes[cells][:, None]) * m
        phi_lo = 1.0 - phi_hi
        extra = d.shape[2:]
        w = np.zeros((m + 1,) + extra)
        w_lo = np.einsum("cq,cq...->c...", qw * phi_lo, d)
        w_hi = np.einsum("cq,cq...->c...", qw * phi_hi, d)
        np.add.at(w, cells, w_lo)
        np.add.at(w, cells + 1, w_hi)
        w.flags.writeable = False
        self._weights[m] = w
        return w

    def atom_stencil(self, m, shift=0.0):
        """Interpolation stencil ``(j, theta, C)`` for every atom at ``sigma_i + shift``.

        Positions must stay inside ``[-1, 0]``.
        """
        out = []
        for s, c in self.atoms:
            pos = (s + shift + 1.0) * m
            if pos < -1e-9 or pos > m + 1e-9:
                raise GridError(f"atom argument {s + shift} outside [-1, 0]")
            pos = min(max(pos, 0.0), float(m))
            j = min(int(np.floor(pos + 1e-12)), m - 1)
            theta = pos - j
            if abs(theta) < 1e-12:
                theta = 0.0
            elif abs(theta - 1.0) < 1e-12:
                j, theta = j + 1, 0.0
                if j == m:
                    j, theta = m - 1, 1.0
            out.append((j, theta, c))
        return out

    def linear_part(self, samples):
        """``int d eta f`` (before ``g``) for samples of shape ``(m + 1, n)``."""
        f = np.asarray(samples, dtype=float)
        m = f.shape[0] - 1
        acc = np.zeros(f.shape[1:])
        for j, theta, c in self.atom_stencil(m):
            val = f[j] if theta == 0.0 else (1.0 - theta) * f[j] + theta * f[j + 1]
            acc = acc + _apply(c, val)
        w = self.density_weights(m)
        if w is not None:
            acc = acc + (np.tensordot(w, f, axes=1) if w.ndim == 1
                         else np.einsum("jab,jb->a", w, f))
        return acc

    def linear_profile(self, profile):
        """``int d eta(sigma) e(sigma) I`` for a scalar grid profile ``e``.

        Returns a float (multiple of the identity) for scalar kernels, else a
        matrix.
        """
        e = np.asarray(profile, dtype=float)
        m = e.size - 1
        acc = 0.0 if self.scalar else np.zeros((self.dim, self.dim))
        for j, theta, c in self.atom_stencil(m):
            val = e[j] if theta == 0.0 else (1.0 - theta) * e[j] + theta * e[j + 1]
            acc = acc + val * (c if np.ndim(c) == 0 else np.asarray(c))
        w = self.density_weights(m)
        if w is not None:
            if w.ndim == 1:
                dens = float(np.dot(w, e))
                acc = acc + (dens if self.scalar else dens * np.eye(self.dim))
            else:
                acc = acc + np.tensordot(e, w, axes=1)
        return acc

    # -- total variation ---------------------------------------------------

    def _density_variation(self, lo, hi, panels=64):
        if self.density is None:
            return 0.0
        lo, hi = max(lo, self.density.a), min(hi, self.density.b)
        if hi <= lo:
            return 0.0
        edges = np.linspace(lo, hi, panels + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        half = 0.5 * (edges[1:] - edges[:-1])[:, None]
        s = mid + half * _GL_X
        d = self._density_at(s)
        if d.ndim == 2:
            norms = np.abs(d)
        else:
            norms = np.array([[spectral_norm(d[i, k]) for k in range(d.shape[1])]
                              for i in range(d.shape[0])])
        return float(np.sum(half * _GL_W * norms))

    def tau(self, r):
        """Total variation of ``eta`` on ``[-1, r]`` (atoms at ``r`` included)."""
        if not -1.0 - 1e-12 <= r <= 1e-12:
            raise GridError(f"r = {r} outside [-1, 0]")
        atoms = sum(spectral_norm(c) for s, c in self.atoms if s <= r + 1e-14)
        return float(atoms + self._density_variation(-1.0, r))

    def tau_profile(self, m):
        """``tau`` at the nodes of the grid with ``m`` cells (cached)."""
        t = self._tau_nodes.get(m)
        if t is None:
            t = np.array([self.tau(s) for s in np.linspace(-1.0, 0.0, m + 1)])
            t.flags.writeable = False
            self._tau_nodes[m] = t
        return t


def evaluate_phi(kernel: DelayKernel, history) -> np.ndarray:
    """``Phi f`` for a sampled history."""
    samples = history.samples if isinstance(history, HistorySegment) else np.asarray(history)
    kernel.check_dim(samples.shape[1])
    return kernel.g(kernel.linear_part(samples))


def tau(kernel: DelayKernel, r: float) -> float:
    return kernel.tau(r)


def gamma_bound(kernel: DelayKernel, alpha: float, p: float) -> float:
    """Dissipativity type of the delay generator in the weighted norm.

    ``max(0, tau(0) * (1/p + beta**p / q) + alpha)`` with ``1/p + 1/q = 1``;
    for ``p = 1`` only ``beta <= 1`` is covered, giving ``max(0, tau(0) + alpha)``.
    """
    t0, beta = kernel.tau(0.0), kernel.beta
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if p == 1:
        if beta > 1:
            raise UnsupportedParameterError(
                f"no dissipativity bound for p = 1 with beta = {beta} > 1")
        return max(0.0, t0 + alpha)
    q = p / (p - 1.0)
    return max(0.0, t0 * (1.0 / p + beta ** p / q) + alpha)


def exp_weighted_kernel(kernel: DelayKernel, h: float, m: Optional[int] = None):
    """``K_h = int exp(sigma/h) d eta(sigma)``.

    With ``m`` given the integral uses the same grid quadrature as
    :func:`evaluate_phi` (what the resolvents need for consistency); without
    it the density part is integrated by composite Gauss-Legendre.
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    if m is not None:
        return kernel.linear_profile(np.exp(np.linspace(-1.0, 0.0, m + 1) / h))
    acc = 0.0 if kernel.scalar else np.zeros((kernel.dim, kernel.dim))
    for s, c in kernel.atoms:
        acc = acc + np.exp(s / h) * (c if np.ndim(c) == 0 else np.asarray(c))
    if kernel.density is not None:
        a, b = kernel.density.a, kernel.density.b
        edges = np.linspace(a, b, 257)
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        half = 0.5 * (edges[1:] - edges[:-1])[:, None]
        s = mid + half * _GL_X
        d = kernel._density_at(s)
        wts = half * _GL_W * np.exp(s / h)
        if d.ndim == 2:
            dens = float(np.sum(wts * d))
            acc = acc + (dens if kernel.scalar else dens * np.eye(kernel.dim))
        else:
            acc = acc + np.tensordot(wts, d, axes=([0, 1], [0, 1]))
    return acc
