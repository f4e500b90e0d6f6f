"""Functionals of trajectories: Bochner norms, energy balance, time-shift modulus.

The array-level helpers (``*_arrays``) take ``coeffs`` of shape
``(..., n_saved, n)`` so the Monte Carlo harness can evaluate a whole batch of
samples at once; the public functions wrap them for a single
:class:`~ncdiff.integrators.Trajectory`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import Cubic, Linear, Truncated, noise_projection, truncation_factor
from .spectral import SobolevSpace, eigenvalues, helmholtz_factors, norm


def trapezoid_weights(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    w = np.zeros_like(t)
    if t.size < 2:
        return w
    h = np.diff(t)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def _sq_norms(coeffs, space) -> np.ndarray:
    return np.asarray(norm(coeffs, space)) ** 2


def bochner_norm_arrays(times, coeffs, space) -> np.ndarray:
    return np.sqrt(_sq_norms(coeffs, space) @ trapezoid_weights(times))


def bochner_norm(traj, space) -> float:
    """``(int_0^T ||u(t)||_s^2 dt)^(1/2)`` by the trapezoid rule on the saved grid."""
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")
    return float(bochner_norm_arrays(traj.times, traj.coeffs, space))


def energy_arrays(coeffs, eps: float) -> np.ndarray:
    """``||u||^2 + eps ||u_x||^2`` at every saved time."""
    c = np.asarray(coeffs)
    return np.sum((1.0 + eps * eigenvalues(c.shape[-1])) * c**2, axis=-1)


def sup_energy_arrays(coeffs, p: float, eps: float) -> np.ndarray:
    return np.max(energy_arrays(coeffs, eps), axis=-1) ** (p / 2)


def sup_energy(traj, p: float, eps: float) -> float:
    """``max_t (||u(t)||^2 + eps ||u_x(t)||^2)^(p/2)`` over the saved times."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return float(sup_energy_arrays(traj.coeffs, p, eps))


@dataclass
class EnergyLedger:
    """Terms of the Ito energy balance along one trajectory.

    ``energy``, ``dissipation`` and ``growth`` are sampled at the saved times;
    ``martingale_increments`` has one entry per step.
    """

    times: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    growth: np.ndarray
    martingale_increments: np.ndarray

    def residuals(self) -> np.ndarray:
        """Per-step defect of the balance, time integrals by the trapezoid rule."""
        dt = np.diff(self.times)
        d = 0.5 * (self.dissipation[..., 1:] + self.dissipation[..., :-1])
        g = 0.5 * (self.growth[..., 1:] + self.growth[..., :-1])
        return np.diff(self.energy, axis=-1) + dt * d - dt * g - self.martingale_increments


def energy_ledger_arrays(times, coeffs, increments, config) -> EnergyLedger:
    """Energy balance terms for a batch ``coeffs`` of shape ``(..., N+1, n)``."""
    c = np.asarray(coeffs, dtype=float)
    n = c.shape[-1]
    eps = config.eps
    lam = eigenvalues(n)
    mode = config.mode
    grad2 = np.sum(lam * c**2, axis=-1)
    l2sq = np.sum(c**2, axis=-1)
    if isinstance(mode, Cubic):
        coupling = np.asarray(norm(c, SobolevSpace.L4)) ** 4
    elif isinstance(mode, Truncated):
        coupling = np.asarray(truncation_factor(c, mode.R)) * np.asarray(norm(c, SobolevSpace.L4)) ** 4
    else:
        forcing = np.stack([mode.forcing_at(t, n) for t in times])
        coupling = np.sum(c * forcing, axis=-1)
    dissipation = 2.0 * (grad2 + coupling)
    g = noise_projection(c, config.noise)
    growth = np.sum(helmholtz_factors(n, eps) * g**2, axis=-1)
    if not isinstance(mode, Linear):
        growth = growth + 2.0 * l2sq
    mart = 2.0 * np.sum(c[..., :-1, :] * g[..., :-1, :], axis=-1) * np.asarray(increments)
    return EnergyLedger(np.asarray(times, dtype=float), energy_arrays(c, eps), dissipation, growth, mart)


def energy_ledger(traj, path, config) -> EnergyLedger:
    if config.save_stride != 1:
        raise ValueError("the energy balance needs every step saved (save_stride=1)")
    if path.n_steps != len(traj.times) - 1:
        raise ValueError("path and trajectory lengths disagree")
    return energy_ledger_arrays(traj.times, traj.coeffs, path.increments, config)


def energy_residual(traj, path, config, full: bool = False):
    """Largest per-step defect of the energy balance (and the series if ``full``)."""
    res = energy_ledger(traj, path, config).residuals()
    worst = float(np.max(np.abs(res))) if res.size else 0.0
    return (worst, res) if full else worst


def _save_interval(times) -> float:
    if len(times) < 2:
        raise ValueError("trajectory needs at least two saved times")
    return float(times[1] - times[0])


def shift_integrals(times, coeffs, max_shift: int, space, extend: str = "zero") -> np.ndarray:
    """``int ||u(t + m h) - u(t)||_s^2 dt`` for ``m = 1..max_shift``.

    ``h`` is the save interval.  With ``extend="zero"`` the trajectory is
    extended by zero beyond ``T`` and the integral runs over ``[0, T]``; with
    ``extend="interior"`` it runs over ``[0, T - m h]`` only.  The result has
    shape ``(..., max_shift)``.
    """
    c = np.asarray(coeffs, dtype=float)
    n_saved = c.shape[-2]
    w = trapezoid_weights(times)
    out = []
    for m in range(1, max_shift + 1):
        if extend == "zero":
            shifted = np.zeros_like(c)
            shifted[..., : n_saved - m, :] = c[..., m:, :]
            out.append(_sq_norms(shifted - c, space) @ w)
        elif extend == "interior":
            wi = trapezoid_weights(times[: n_saved - m])
            out.append(_sq_norms(c[..., m:, :] - c[..., : n_saved - m, :], space) @ wi)
        else:
            raise ValueError(f"unknown extension {extend!r}")
    return np.stack(out, axis=-1)


def _shift_count(times, delta: float) -> int:
    h = _save_interval(times)
    if delta > 1:
        raise ValueError("delta must be <= 1")
    m = int(np.floor(delta / h + 1e-9))
    if m < 1:
        raise ValueError(f"delta={delta} is below the save interval {h}")
    return m


def modulus_arrays(times, coeffs, deltas, space, extend: str = "zero") -> np.ndarray:
    """``sup_{0 < theta <= delta}`` of the shift integral for each delta; shape ``(..., len(deltas))``."""
    counts = [_shift_count(times, d) for d in deltas]
    ints = shift_integrals(times, coeffs, max(counts), space, extend)
    running = np.maximum.accumulate(ints, axis=-1)
    return np.stack([running[..., m - 1] for m in counts], axis=-1)


def shift_modulus(traj, delta: float, space, extend: str = "zero") -> float:
    """Time-shift modulus ``sup_{|theta| <= delta} int_0^T ||u(t+theta) - u(t)||_s^2 dt``.

    Only positive shifts on the save grid are scanned: after a change of
    variables a negative shift gives the same integral with the roles of the
    two ends swapped, and the zero extension makes both ends symmetric.
    """
    return float(modulus_arrays(traj.times, traj.coeffs, [delta], space, extend)[0])


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class ModulusReport:
    deltas: list
    values: list
    space: str
    slope: float
    ordering: str = "E sup"
    samples: int = 1
    standard_errors: list = field(default_factory=list)
    sup_of_mean: list = field(default_factory=list)
    sup_of_mean_slope: float | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b < a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("modulus must be nondecreasing in delta")

    def to_dict(self):
        return {
            "quantity": "time_shift_modulus",
            "parameters": {"space": self.space, "ordering": self.ordering, "samples": self.samples, **self.provenance},
            "value": self.slope,
            "series": {
                "delta": self.deltas,
                "modulus": self.values,
                "standard_error": self.standard_errors,
                "sup_of_mean": self.sup_of_mean,
                "sup_of_mean_slope": self.sup_of_mean_slope,
            },
        }

    def csv_rows(self):
        se = self.standard_errors or [None] * len(self.deltas)
        som = self.sup_of_mean or [None] * len(self.deltas)
        return [
            {"delta": d, "modulus": v, "standard_error": e, "sup_of_mean": m}
            for d, v, e, m in zip(self.deltas, self.values, se, som)
        ]


def modulus_report(traj, deltas, space, extend: str = "zero") -> ModulusReport:
    vals = modulus_arrays(traj.times, traj.coeffs, deltas, space, extend)
    return ModulusReport(list(map(float, deltas)), vals.tolist(), SobolevSpace(space).value, loglog_slope(deltas, vals))
