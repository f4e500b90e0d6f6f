"""Galerkin drift and diffusion for the stochastic nonclassical diffusion equation.

In the sine basis the n-mode Galerkin system reads

    dc_k + (lam_k c_k + N_k - c_k) / (1 + eps lam_k) dt = (P_n g(u))_k / (1 + eps lam_k) dB

with ``N = P_n(u^3)`` (or its cut-off version), driven by one scalar
Brownian motion.  Every function here is vectorised over leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .spectral import SobolevSpace, analyze, eigenvalues, helmholtz_factors, norm, synthesize

EPS_MAX = 0.5


def dealias_nodes(n: int) -> int:
    """Grid size on which ``P_n(u^3)`` is computed without aliasing."""
    return 4 * n


def cubic_projection(c) -> np.ndarray:
    """Coefficients of ``P_n(u^3)``; exact for band-limited ``u``."""
    c = np.asarray(c, dtype=float)
    n = c.shape[-1]
    u = synthesize(c, dealias_nodes(n))
    return analyze(u * u * u, n)


def smoothstep_cutoff(r):
    """C^1 cut-off: 1 on [0, 1], 0 on [2, inf), cubic smoothstep in between."""
    r = np.asarray(r, dtype=float)
    s = np.clip(r - 1.0, 0.0, 1.0)
    out = 1.0 - 3.0 * s**2 + 2.0 * s**3
    return float(out) if out.ndim == 0 else out


def truncation_factor(c, R: float):
    if R <= 0:
        raise ValueError("truncation radius R must be positive")
    return smoothstep_cutoff(norm(c, SobolevSpace.H1) / R)


@dataclass(frozen=True)
class Cubic:
    """Nonlinearity ``u^3 - u``."""

    def nonlinear(self, c, t):
        return cubic_projection(c)

    def to_dict(self):
        return {"kind": "cubic"}


@dataclass(frozen=True)
class Truncated:
    """Nonlinearity ``rho(||u||_H1 / R) u^3 - u``."""

    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("truncation radius R must be positive")

    def nonlinear(self, c, t):
        rho = truncation_factor(c, self.R)
        return np.asarray(rho)[..., None] * cubic_projection(c)

    def to_dict(self):
        return {"kind": "truncated", "R": self.R}


@dataclass(frozen=True, eq=False)
class Linear:
    """Linear equation with a given forcing ``f``; no ``-u`` term.

    ``forcing`` is ``None`` (zero), a coefficient vector constant in time, or
    a callable ``t -> coefficients``.
    """

    forcing: Union[None, np.ndarray, Callable[[float], np.ndarray]] = None

    def forcing_at(self, t, n: int) -> np.ndarray:
        if self.forcing is None:
            return np.zeros(n)
        f = self.forcing(t) if callable(self.forcing) else self.forcing
        f = np.asarray(f, dtype=float)
        if f.shape[-1] != n:
            raise ValueError(f"forcing has {f.shape[-1]} modes, simulation has {n}")
        return f

    def nonlinear(self, c, t):
        return self.forcing_at(t, np.shape(c)[-1])

    def to_dict(self):
        if self.forcing is None:
            return {"kind": "linear", "forcing": None}
        if callable(self.forcing):
            return {"kind": "linear", "forcing": repr(self.forcing)}
        return {"kind": "linear", "forcing": np.asarray(self.forcing, dtype=float).tolist()}


NonlinearityMode = Union[Cubic, Truncated, Linear]


@dataclass(frozen=True, eq=False)
class Additive:
    """``g(u) = gamma * profile``."""

    profile: np.ndarray
    gamma: float

    def __post_init__(self):
        p = np.array(self.profile, dtype=float).reshape(-1)
        p.setflags(write=False)
        object.__setattr__(self, "profile", p)

    @property
    def lipschitz(self) -> float:
        return max(abs(self.gamma), abs(self.gamma) * float(np.linalg.norm(self.profile)))

    def project(self, c, M=None):
        c = np.asarray(c, dtype=float)
        n = c.shape[-1]
        if self.profile.size > n:
            raise ValueError(f"noise profile has {self.profile.size} modes, simulation has {n}")
        out = np.zeros(n)
        out[: self.profile.size] = self.gamma * self.profile
        return np.broadcast_to(out, c.shape).copy()

    def to_dict(self):
        return {"kind": "additive", "gamma": self.gamma, "profile": self.profile.tolist()}


@dataclass(frozen=True)
class LinearMult:
    """``g(u) = gamma * u``."""

    gamma: float

    @property
    def lipschitz(self) -> float:
        return abs(self.gamma)

    def project(self, c, M=None):
        return self.gamma * np.asarray(c, dtype=float)

    def to_dict(self):
        return {"kind": "linear_mult", "gamma": self.gamma}


@dataclass(frozen=True)
class SineMult:
    """``g(u) = gamma * sin(u)`` pointwise, projected on a grid of ``M`` nodes.

    Globally Lipschitz in L2 with constant ``|gamma|``; its H1 Lipschitz
    constant is only local, so it is a stress model rather than a certified
    member of the H1 assumption class.
    """

    gamma: float

    @property
    def lipschitz(self) -> float:
        return abs(self.gamma)

    def project(self, c, M=None):
        c = np.asarray(c, dtype=float)
        n = c.shape[-1]
        M = dealias_nodes(n) if M is None else M
        return self.gamma * analyze(np.sin(synthesize(c, M)), n)

    def to_dict(self):
        return {"kind": "sine_mult", "gamma": self.gamma}


NoiseModel = Union[Additive, LinearMult, SineMult]


def noise_projection(c, model: NoiseModel, M: int | None = None) -> np.ndarray:
    """Coefficients of ``P_n g(u)``."""
    c = np.asarray(c, dtype=float)
    if M is not None and M < 2 * c.shape[-1]:
        raise ValueError(f"noise projection needs M >= 2n = {2 * c.shape[-1]}")
    return model.project(c, M)


@dataclass(frozen=True, eq=False)
class GalerkinState:
    """Coefficients ``c`` (shape ``(..., n)``) at time ``t`` for parameter ``eps``."""

    c: np.ndarray
    t: float
    eps: float

    def __post_init__(self):
        if not 0.0 <= self.eps <= EPS_MAX:
            raise ValueError(f"eps={self.eps} outside [0, 1/2]")
        if self.t < 0:
            raise ValueError("time must be nonnegative")
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))

    @property
    def n_modes(self) -> int:
        return self.c.shape[-1]


def drift(state: GalerkinState, mode: NonlinearityMode) -> np.ndarray:
    """Per-mode drift ``a_k`` of the Galerkin system."""
    c = state.c
    n = c.shape[-1]
    lam = eigenvalues(n)
    N = mode.nonlinear(c, state.t)
    if isinstance(mode, Linear):
        rhs = lam * c + N
    else:
        rhs = lam * c + N - c
    return -rhs * helmholtz_factors(n, state.eps)


def diffusion(state: GalerkinState, model: NoiseModel) -> np.ndarray:
    """Per-mode diffusion ``b_k = (P_n g(u))_k / (1 + eps lam_k)``."""
    b = noise_projection(state.c, model)
    return b * helmholtz_factors(state.n_modes, state.eps)
