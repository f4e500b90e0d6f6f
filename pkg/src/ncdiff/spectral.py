"""Dirichlet sine basis on [0, 1], grid transforms and Sobolev norms.

Fields are represented by their coefficients ``c_1..c_n`` in the orthonormal
basis ``e_k(x) = sqrt(2) sin(k pi x)``.  All array functions accept a trailing
mode axis, so a batch of fields is an array of shape ``(..., n)``.

Grid values live on the interior nodes ``x_j = j / (M + 1)``, ``j = 1..M``.
The discrete sine transform on these nodes is exact for band-limited input
as long as the grid is fine enough (``M >= 2n`` for projection, ``M >= 4n``
for quartic integrands).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SQRT2 = np.sqrt(2.0)


class SobolevSpace(str, enum.Enum):
    L2 = "L2"
    H1semi = "H1semi"
    H1 = "H1"
    H2 = "H2"
    Hneg1 = "Hneg1"
    L4 = "L4"


def eigenvalue(k: int) -> float:
    """Return ``(k pi)^2``, the k-th Dirichlet eigenvalue of ``-d^2/dx^2``."""
    if k < 1:
        raise ValueError("mode index must be >= 1 (no constant mode under Dirichlet conditions)")
    return float((k * np.pi) ** 2)


@lru_cache(maxsize=None)
def eigenvalues(n: int) -> np.ndarray:
    lam = (np.arange(1, n + 1) * np.pi) ** 2
    lam.setflags(write=False)
    return lam


def eval_basis(k: int, x):
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0.0) or np.any(x_arr > 1.0):
        raise ValueError("x must lie in [0, 1]")
    if k < 1:
        raise ValueError("mode index must be >= 1")
    out = SQRT2 * np.sin(k * np.pi * x_arr)
    return float(out) if out.ndim == 0 else out


def grid_nodes(M: int) -> np.ndarray:
    if M < 1:
        raise ValueError("node count must be >= 1")
    return np.arange(1, M + 1) / (M + 1)


@lru_cache(maxsize=None)
def _basis_matrix(M: int, n: int) -> np.ndarray:
    # B[k, j] = e_{k+1}(x_j); read-only so the cache cannot be corrupted
    j = np.arange(1, M + 1)
    k = np.arange(1, n + 1)
    B = SQRT2 * np.sin(np.pi * np.outer(k, j) / (M + 1))
    B.setflags(write=False)
    return B


def synthesize(coeffs, M: int) -> np.ndarray:
    """Evaluate ``sum_k c_k e_k`` at the ``M`` interior grid nodes."""
    c = _as_coeffs(coeffs)
    if M < 1:
        raise ValueError("node count must be >= 1")
    return c @ _basis_matrix(M, c.shape[-1])


def analyze(values, n: int) -> np.ndarray:
    """Discrete L2 projection of grid values onto the first ``n`` modes.

    Raises ``ValueError`` when ``M < 2n``: the upper modes would alias.
    """
    g = np.asarray(values, dtype=float)
    M = g.shape[-1]
    if n < 1:
        raise ValueError("target mode count must be >= 1")
    if M < 2 * n:
        raise ValueError(f"grid of {M} nodes cannot resolve {n} modes without aliasing (need M >= {2 * n})")
    return (g @ _basis_matrix(M, n).T) / (M + 1)


def grid_integral(values) -> np.ndarray:
    """Integral over [0, 1] of a grid function vanishing at both ends."""
    g = np.asarray(values, dtype=float)
    return g.sum(axis=-1) / (g.shape[-1] + 1)


def norm(coeffs, space, M: int | None = None):
    """Sobolev norm of a field (or batch of fields) given by its coefficients.

    ``L4`` is evaluated by grid quadrature on ``M >= 4n`` nodes, which is exact
    for band-limited fields; all other norms are diagonal in the sine basis.
    """
    c = _as_coeffs(coeffs)
    n = c.shape[-1]
    space = SobolevSpace(space)
    lam = eigenvalues(n)
    if space is SobolevSpace.L4:
        if M is None:
            M = 4 * n
        if M < 4 * n:
            raise ValueError(f"L4 quadrature needs M >= 4n = {4 * n}, got {M}")
        u = synthesize(c, M)
        out = grid_integral(u**4) ** 0.25
    else:
        weight = {
            SobolevSpace.L2: 1.0,
            SobolevSpace.H1semi: lam,
            SobolevSpace.H1: 1.0 + lam,
            SobolevSpace.H2: lam**2,
            SobolevSpace.Hneg1: 1.0 / lam,
        }[space]
        out = np.sqrt(np.sum(weight * c**2, axis=-1))
    return float(out) if np.ndim(out) == 0 else out


def helmholtz_factors(n: int, eps: float) -> np.ndarray:
    """Diagonal of ``(1 - eps d^2/dx^2)^{-1}`` on the first ``n`` modes."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    return 1.0 / (1.0 + eps * eigenvalues(n))


def helmholtz_solve(coeffs, eps: float) -> np.ndarray:
    """Solve ``u - eps u_xx = v`` for ``u`` given the coefficients of ``v``."""
    c = _as_coeffs(coeffs)
    if eps == 0:
        return c.copy()
    return c * helmholtz_factors(c.shape[-1], eps)


def _as_coeffs(f) -> np.ndarray:
    if isinstance(f, SpectralField):
        return f.coeffs
    c = np.asarray(f, dtype=float)
    if c.ndim == 0:
        raise ValueError("coefficients must have a mode axis")
    return c


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coefficient vector of ``u = sum_k c_k e_k``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.size == 0:
            raise ValueError("a field needs at least one mode")
        if not np.all(np.isfinite(c)):
            raise ValueError("field coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_modes(self) -> int:
        return self.coeffs.size

    @classmethod
    def zeros(cls, n: int) -> SpectralField:
        return cls(np.zeros(n))

    @classmethod
    def basis(cls, k: int, n: int, scale: float = 1.0) -> SpectralField:
        if not 1 <= k <= n:
            raise ValueError(f"mode {k} outside 1..{n}")
        c = np.zeros(n)
        c[k - 1] = scale
        return cls(c)

    def padded(self, n: int) -> SpectralField:
        """Zero-pad (never truncate) to ``n`` modes."""
        if n < self.n_modes:
            raise ValueError(f"cannot pad {self.n_modes} modes down to {n}")
        c = np.zeros(n)
        c[: self.n_modes] = self.coeffs
        return SpectralField(c)

    def norm(self, space, M: int | None = None) -> float:
        return norm(self.coeffs, space, M)

    def synthesize(self, M: int) -> np.ndarray:
        return synthesize(self.coeffs, M)

    def __eq__(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __repr__(self):
        return f"SpectralField(n_modes={self.n_modes}, coeffs={np.array2string(self.coeffs, threshold=8)})"
