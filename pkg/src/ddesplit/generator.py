"""The linear operator ``B`` with its semigroup ``exp(tB)`` and resolvent.

``B`` is either a dense matrix or a structured operator (the 1-D Dirichlet
finite-difference Laplacian, or a diagonal spectral operator). Symmetric
variants are diagonalized once at construction, so ``exp(tB)`` is exact up to
rounding; non-symmetric dense matrices fall back to ``scipy.linalg.expm``.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from . import _backend
from .errors import DimensionError, NumericalError

VARIANTS = ("dense", "laplacian1d", "diagonal")


class LinearGenerator:
    """Generator ``B`` with declared dissipativity shift ``alpha``.

    Use the constructors :meth:`dense`, :meth:`laplacian1d` and
    :meth:`diagonal` rather than calling ``__init__`` directly.
    """

    def __init__(self, variant, n, alpha, matrix=None, eigs=None,
                 length=None, diffusivity=None):
        if variant not in VARIANTS:
            raise ValueError(f"unknown generator variant {variant!r}")
        self.variant = variant
        self.n = int(n)
        self.alpha = float(alpha)
        self.length = length
        self.diffusivity = diffusivity
        self._matrix = None if matrix is None else np.array(matrix, dtype=float)
        self._expm_cache = {}
        self._evals = None
        self._evecs = None
        if variant == "diagonal":
            self._evals = np.array(eigs, dtype=float)
        elif variant == "laplacian1d":
            k = np.arange(1, self.n + 1)
            c = self.diffusivity / self.dx ** 2
            self._evals = -4.0 * c * np.sin(k * np.pi / (2 * (self.n + 1))) ** 2
            j = np.arange(1, self.n + 1)
            self._evecs = np.sqrt(2.0 / (self.n + 1)) * np.sin(np.outer(j, k) * np.pi / (self.n + 1))
        elif np.allclose(self._matrix, self._matrix.T, rtol=0, atol=1e-14):
            self._evals, self._evecs = np.linalg.eigh(self._matrix)
        for a in (self._matrix, self._evals):
            if a is not None:
                a.flags.writeable = False

    # -- constructors -----------------------------------------------------

    @classmethod
    def dense(cls, matrix, alpha=None):
        a = np.atleast_2d(np.asarray(matrix, dtype=float))
        if a.shape[0] != a.shape[1]:
            raise DimensionError(f"dense generator needs a square matrix, got {a.shape}")
        if alpha is None:
            alpha = float(np.linalg.eigvalsh(0.5 * (a + a.T)).max())
        return cls("dense", a.shape[0], alpha, matrix=a)

    @classmethod
    def laplacian1d(cls, n, length=1.0, diffusivity=1.0, alpha=0.0):
        if n < 1:
            raise ValueError("laplacian1d needs n >= 1 interior points")
        if diffusivity <= 0 or length <= 0:
            raise ValueError("length and diffusivity must be positive")
        if alpha < 0:
            raise ValueError("the Dirichlet Laplacian is only known to be dissipative for alpha >= 0")
        return cls("laplacian1d", n, alpha, length=float(length), diffusivity=float(diffusivity))

    @classmethod
    def diagonal(cls, eigs, alpha=None):
        eigs = np.atleast_1d(np.asarray(eigs, dtype=float))
        top = float(eigs.max())
        alpha = top if alpha is None else float(alpha)
        if alpha < top:
            raise ValueError(f"alpha = {alpha} below the largest eigenvalue {top}")
        return cls("diagonal", eigs.size, alpha, eigs=eigs)

    @property
    def dx(self):
        return self.length / (self.n + 1)

    @property
    def symmetric(self):
        return self._evals is not None

    def grid_points(self):
        """Interior spatial points, used to build initial profiles."""
        length = self.length if self.length is not None else 1.0
        return length * np.arange(1, self.n + 1) / (self.n + 1)

    def matrix(self):
        if self.variant == "dense":
            return self._matrix.copy()
        if self.variant == "diagonal":
            return np.diag(self._evals)
        c = self.diffusivity / self.dx ** 2
        return c * (np.diag(np.full(self.n - 1, 1.0), -1) - 2 * np.eye(self.n)
                    + np.diag(np.full(self.n - 1, 1.0), 1))

    def describe(self):
        d = {"variant": self.variant, "n": self.n, "alpha": self.alpha}
        if self.variant == "laplacian1d":
            d.update(length=self.length, diffusivity=self.diffusivity)
        elif self.variant == "diagonal":
            d["eigs"] = self._evals.tolist()
        else:
            d["matrix"] = self._matrix.tolist()
        return d

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DimensionError(f"vector of dimension {x.shape[-1]} for generator of size {self.n}")
        return x

    # -- actions ----------------------------------------------------------

    def apply_B(self, x):
        """``Bx``; ``x`` may be a vector or a stack of row vectors."""
        x = self._check(x)
        if self.variant == "diagonal":
            return x * self._evals
        if self.variant == "dense":
            return x @ self._matrix.T
        c = self.diffusivity / self.dx ** 2
        out = -2.0 * x
        out[..., 1:] += x[..., :-1]
        out[..., :-1] += x[..., 1:]
        return c * out

    def semigroup_apply(self, t, x):
        """``exp(tB) x`` for ``t >= 0``."""
        if t < 0:
            raise ValueError(f"semigroup time must be non-negative, got {t}")
        x = self._check(x)
        if t == 0:
            return x.copy()
        if self.variant == "diagonal":
            return x * np.exp(t * self._evals)
        if self._evecs is not None:
            q = self._evecs
            return ((x @ q) * np.exp(t * self._evals)) @ q.T
        e = self._expm_cache.get(t)
        if e is None:
            e = scipy.linalg.expm(t * self._matrix)
            self._expm_cache[t] = e
        return x @ e.T

    def solve(self, h, y, extra=None):
        """Solve ``(I - hB - extra) x = y``.

        ``extra`` is ``None``, a scalar (multiple of the identity) or an
        ``n x n`` matrix. Tridiagonal systems go through the Thomas kernel.
        """
        y = self._check(y)
        scalar_extra = extra is None or np.ndim(extra) == 0
        s = 0.0 if extra is None else extra
        if self.variant == "diagonal" and scalar_extra:
            den = 1.0 - h * self._evals - s
            if np.any(den == 0):
                raise NumericalError("singular diagonal resolvent")
            return y / den
        if self.variant == "laplacian1d" and scalar_extra:
            c = h * self.diffusivity / self.dx ** 2
            n = self.n
            diag = np.full(n, 1.0 + 2.0 * c - s)
            off = np.full(n, -c)
            rhs = np.ascontiguousarray(y.reshape(n, -1) if y.ndim == 1 else y.T)
            try:
                x = _backend.core.thomas(off, diag, off, rhs)
            except ZeroDivisionError as exc:
                raise NumericalError(str(exc)) from None
            return x[:, 0] if y.ndim == 1 else x.T
        a = np.eye(self.n) - h * self.matrix()
        a = a - (s * np.eye(self.n) if scalar_extra else np.asarray(extra, float))
        try:
            lu = scipy.linalg.lu_factor(a, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise NumericalError(str(exc)) from None
        if np.any(np.diag(lu[0]) == 0):
            raise NumericalError("singular resolvent system")
        return scipy.linalg.lu_solve(lu, y.T).T

    def resolvent_B(self, h, y):
        """``(I - hB)^{-1} y``; requires ``1 - h*alpha > 0``."""
        if h <= 0:
            raise ValueError(f"resolvent step must be positive, got {h}")
        if h * self.alpha >= 1:
            raise NumericalError(f"h*alpha = {h * self.alpha} >= 1: resolvent may not exist")
        return self.solve(h, y)

    def dissipativity_estimate(self, trials=64, rng=None):
        """Largest observed ``<Bx, x>/||x||^2`` over probe vectors.

        Probes are ``trials`` random directions plus the top eigenvector of the
        symmetric part of ``B``, which attains the supremum.
        """
        if trials < 1:
            raise ValueError("trials must be >= 1")
        rng = np.random.default_rng(rng)
        probes = rng.standard_normal((trials, self.n))
        sym = 0.5 * (self.matrix() + self.matrix().T)
        w, v = np.linalg.eigh(sym)
        probes = np.vstack([probes, v[:, -1]])
        bx = self.apply_B(probes)
        quot = np.einsum("ij,ij->i", bx, probes) / np.einsum("ij,ij->i", probes, probes)
        return float(quot.max())


# module-level spellings of the operations
def apply_B(gen, x):
    return gen.apply_B(x)


def semigroup_apply(gen, t, x):
    return gen.semigroup_apply(t, x)


def resolvent_B(gen, h, y):
    return gen.resolvent_B(h, y)


def dissipativity_estimate(gen, trials=64, rng=None):
    return gen.dissipativity_estimate(trials, rng)
