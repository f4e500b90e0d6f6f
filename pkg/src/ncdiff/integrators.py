"""Time stepping for the Galerkin system and trajectory production."""

from __future__ import annotations

import enum
import hashlib
import io
import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dynamics import (
    EPS_MAX,
    Additive,
    Cubic,
    GalerkinState,
    Linear,
    NoiseModel,
    NonlinearityMode,
    diffusion,
    drift,
)
from .spectral import SobolevSpace, SpectralField, eigenvalues, helmholtz_factors, norm
from .stochastic import BrownianPath, derive_seed, n_steps_for, refine, sample_path

TRAJ_MAGIC = b"NCDTRAJ\x00"
TRAJ_VERSION = 1
# states whose L2 norm exceeds this are treated as blown up before they overflow
BLOWUP_NORM = 1e100


class Scheme(str, enum.Enum):
    TamedEM = "tamed_em"
    SemiImplicitEM = "semi_implicit_em"


class BlowUpError(FloatingPointError):
    def __init__(self, t: float, value: float, sample: int | None = None):
        self.t = t
        self.value = value
        self.sample = sample
        where = "" if sample is None else f" in sample {sample}"
        super().__init__(f"numerical blow-up at t={t:.6g}{where}: L2 norm of state = {value!r}")


def default_u0(n: int) -> SpectralField:
    """Coefficients of ``sin(pi x)``, i.e. ``e_1 / sqrt(2)``."""
    return SpectralField.basis(1, n, 1.0 / np.sqrt(2.0))


@dataclass(frozen=True, eq=False)
class SimConfig:
    eps: float = 0.1
    n_modes: int = 32
    dt: float = 1e-3
    T: float = 1.0
    scheme: Scheme = Scheme.SemiImplicitEM
    mode: NonlinearityMode = field(default_factory=Cubic)
    noise: NoiseModel = field(default_factory=lambda: Additive([1.0], 0.3))
    u0: SpectralField | None = None
    save_stride: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.eps <= EPS_MAX:
            raise ValueError(f"eps={self.eps} violates the hypothesis eps in [0, 1/2]")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if self.save_stride < 1:
            raise ValueError("save_stride must be >= 1")
        n_steps_for(self.T, self.dt)
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        u0 = default_u0(self.n_modes) if self.u0 is None else self.u0
        if not isinstance(u0, SpectralField):
            u0 = SpectralField(u0)
        object.__setattr__(self, "u0", u0.padded(self.n_modes))

    @property
    def n_steps(self) -> int:
        return n_steps_for(self.T, self.dt)

    def with_(self, **changes) -> SimConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "n_modes": self.n_modes,
            "dt": self.dt,
            "T": self.T,
            "scheme": self.scheme.value,
            "mode": self.mode.to_dict(),
            "noise": self.noise.to_dict(),
            "u0": self.u0.coeffs.tolist(),
            "save_stride": self.save_stride,
            "seed": self.seed,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def step(state: GalerkinState, dB, dt: float, scheme: Scheme, mode: NonlinearityMode, noise: NoiseModel) -> GalerkinState:
    """Advance the Galerkin state by one step of size ``dt``.

    ``dB`` is a scalar or, for a batch of states, one increment per batch row.
    Raises :class:`BlowUpError` if the new state is not finite.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    with np.errstate(over="ignore", invalid="ignore"):
        c_new = _advance(state, np.asarray(dB, dtype=float), dt, Scheme(scheme), mode, noise)
    bad = _blown(c_new)
    if np.any(bad):
        idx = np.flatnonzero(np.atleast_1d(bad))[0]
        sample = None if np.ndim(bad) == 0 else int(idx)
        raise BlowUpError(state.t + dt, float(np.atleast_1d(_l2(c_new))[idx]), sample)
    return GalerkinState(c_new, state.t + dt, state.eps)


def _advance(state, dB, dt, scheme, mode, noise):
    c = state.c
    n = c.shape[-1]
    dB = dB[..., None] if dB.ndim else dB
    b = diffusion(state, noise)
    if scheme is Scheme.TamedEM:
        a = drift(state, mode)
        tame = 1.0 + dt * np.sqrt(np.sum(a * a, axis=-1, keepdims=True))
        return c + dt * a / tame + b * dB
    h = helmholtz_factors(n, state.eps)
    N = mode.nonlinear(c, state.t)
    explicit = -N * h if isinstance(mode, Linear) else (c - N) * h
    return (c + dt * explicit + b * dB) / (1.0 + dt * eigenvalues(n) * h)


def _l2(c):
    with np.errstate(over="ignore", invalid="ignore"):
        return np.sqrt(np.sum(c * c, axis=-1))


def _blown(c):
    with np.errstate(over="ignore", invalid="ignore"):
        r = _l2(c)
        return ~(np.isfinite(r) & (r < BLOWUP_NORM))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Saved states ``coeffs[j]`` at ``times[j]``; ``coeffs`` has shape ``(n_saved, n)``."""

    times: np.ndarray
    coeffs: np.ndarray
    config: SimConfig | None = None

    @property
    def fields(self) -> list[SpectralField]:
        return [SpectralField(c) for c in self.coeffs]

    @property
    def n_modes(self) -> int:
        return self.coeffs.shape[-1]

    def __len__(self):
        return len(self.times)

    def norms(self, space, M=None) -> np.ndarray:
        return np.asarray(norm(self.coeffs, space, M))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(["t"] + [f"c_{k}" for k in range(1, self.n_modes + 1)]) + "\n")
        for t, row in zip(self.times, self.coeffs):
            buf.write(",".join(repr(float(x)) for x in (t, *row)) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> Trajectory:
        rows = [line.split(",") for line in text.splitlines()[1:] if line.strip()]
        data = np.array(rows, dtype=float).reshape(len(rows), -1)
        return cls(data[:, 0].copy(), data[:, 1:].copy())

    def to_bytes(self) -> bytes:
        head = struct.pack("<qq", *self.coeffs.shape)
        return (
            TRAJ_MAGIC
            + bytes([TRAJ_VERSION])
            + head
            + np.asarray(self.times, dtype="<f8").tobytes()
            + np.asarray(self.coeffs, dtype="<f8").tobytes()
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> Trajectory:
        if data[:8] != TRAJ_MAGIC:
            raise ValueError("not a trajectory file (bad magic)")
        if data[8] != TRAJ_VERSION:
            raise ValueError(f"unsupported trajectory file version {data[8]}")
        n_saved, n = struct.unpack("<qq", data[9:25])
        body = np.frombuffer(data[25:], dtype="<f8")
        if body.size != n_saved * (n + 1):
            raise ValueError("trajectory file truncated")
        return cls(body[:n_saved].astype(float), body[n_saved:].reshape(n_saved, n).astype(float))

    def save(self, path, fmt: str = "csv"):
        path = Path(path)
        if fmt == "csv":
            path.write_text(self.to_csv())
        elif fmt == "bin":
            path.write_bytes(self.to_bytes())
        else:
            raise ValueError(f"unknown trajectory format {fmt!r}")

    @classmethod
    def load(cls, path) -> Trajectory:
        data = Path(path).read_bytes()
        if data[:8] == TRAJ_MAGIC:
            return cls.from_bytes(data)
        return cls.from_csv(data.decode())


@dataclass
class BatchResult:
    """Output of :func:`simulate_batch`.

    ``coeffs`` has shape ``(B, n_saved, n)``; rows of blown-up samples are NaN
    from the blow-up time on, and ``blowup_times`` holds that time (NaN for
    samples that stayed finite).
    """

    times: np.ndarray
    coeffs: np.ndarray
    blowup_times: np.ndarray

    @property
    def blown(self) -> np.ndarray:
        return ~np.isnan(self.blowup_times)

    def trajectory(self, i: int, config: SimConfig | None = None) -> Trajectory:
        return Trajectory(self.times, self.coeffs[i], config)


def simulate_batch(config: SimConfig, increments, u0=None) -> BatchResult:
    """Integrate one trajectory per row of ``increments`` (shape ``(B, N)``).

    A sample that blows up is frozen at NaN and reported through
    ``blowup_times`` instead of aborting the whole batch.
    """
    inc = np.atleast_2d(np.asarray(increments, dtype=float))
    B, N = inc.shape
    if N != config.n_steps:
        raise ValueError(f"path has {N} increments, config needs {config.n_steps}")
    c = np.array(np.broadcast_to(config.u0.coeffs if u0 is None else u0, (B, config.n_modes)), dtype=float)
    stride = config.save_stride
    saved = [c.copy()]
    save_idx = [0]
    blowup_times = np.full(B, np.nan)
    alive = np.ones(B, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(N):
            state = GalerkinState(c, j * config.dt, config.eps)
            c = _advance(state, inc[:, j], config.dt, config.scheme, config.mode, config.noise)
            bad = _blown(c) & alive
            if np.any(bad):
                blowup_times[bad] = (j + 1) * config.dt
                alive &= ~bad
            if not np.all(alive):
                c[~alive] = np.nan
            if (j + 1) % stride == 0:
                saved.append(c.copy())
                save_idx.append(j + 1)
    times = np.asarray(save_idx, dtype=float) * config.dt
    return BatchResult(times, np.stack(saved, axis=1), blowup_times)


def simulate(config: SimConfig, path: BrownianPath) -> Trajectory:
    """Integrate ``config`` along ``path``; deterministic given both."""
    if path.n_steps and not np.isclose(path.dt, config.dt, rtol=0, atol=1e-15):
        raise ValueError(f"path step {path.dt} differs from config step {config.dt}")
    res = simulate_batch(config, path.increments[None, :])
    if res.blown[0]:
        t = float(res.blowup_times[0])
        raise BlowUpError(t, float("nan"))
    return res.trajectory(0, config)


@dataclass
class StrongOrderResult:
    order: float
    dts: list
    mean_gaps: list
    samples: int
    excluded: int

    def to_dict(self):
        return {
            "order": self.order,
            "dts": self.dts,
            "mean_gaps": self.mean_gaps,
            "samples": self.samples,
            "excluded": self.excluded,
        }


def strong_order(config: SimConfig, levels: int, samples: int, stream: int = 0) -> StrongOrderResult:
    """Estimate the strong order of the configured scheme.

    Every sample draws one path at ``config.dt`` and refines it by Brownian
    bridges ``levels - 1`` times, so all levels see the same noise.  The L2
    gaps between endpoints at successive levels are averaged over samples and
    the order is minus the least-squares slope of ``log2(mean gap)`` against
    the level index.
    """
    if levels < 3:
        raise ValueError("strong order estimation needs levels >= 3")
    paths = [sample_path(config.T, config.dt, derive_seed(config.seed, s, stream)) for s in range(samples)]
    ends = []
    blown = np.zeros(samples, dtype=bool)
    dts = []
    for level in range(levels):
        if level:
            paths = [refine(p) for p in paths]
        cfg = config.with_(dt=paths[0].dt, save_stride=paths[0].n_steps)
        res = simulate_batch(cfg, np.stack([p.increments for p in paths]))
        blown |= res.blown
        ends.append(res.coeffs[:, -1, :])
        dts.append(cfg.dt)
    keep = ~blown
    if not np.any(keep):
        raise BlowUpError(config.T, float("nan"))
    gaps = np.stack([np.linalg.norm(ends[l + 1][keep] - ends[l][keep], axis=-1) for l in range(levels - 1)], axis=1)
    x = np.arange(levels - 1, dtype=float)
    with np.errstate(divide="ignore"):
        logs = np.log2(gaps)
    usable = np.all(np.isfinite(logs), axis=1)
    if not np.any(usable):
        # identical endpoints at every level: nothing to regress
        return StrongOrderResult(float("nan"), dts, [0.0] * (levels - 1), samples, int(blown.sum()))
    slopes = np.polyfit(x, logs[usable].T, 1)[0]
    return StrongOrderResult(float(-slopes.mean()), dts, gaps.mean(axis=0).tolist(), samples, int(blown.sum()))
