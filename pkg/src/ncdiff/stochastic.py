"""Reproducible scalar Brownian paths.

Randomness comes from NumPy's Philox-4x64 counter-based generator keyed by a
64-bit seed; normals are drawn with ``Generator.standard_normal`` (NumPy's
ziggurat).  Per-sample seeds are derived statelessly from
``(master, sample_index, stream)`` with the SplitMix64 finalizer, which is a
bijection on 64-bit words, so distinct ``(sample_index, stream)`` pairs never
collide for a fixed master seed.

Increments are stored on a fixed absolute grid: multiples of a power of two
``quantum`` about ``2**-47`` times the root step's standard deviation.  Bridge
midpoints are snapped to the same grid, so every refinement level sums back
to its parent exactly in floating point.  The rounding is about 1e-14
relative to the increment size and is invisible to any statistic.
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
STREAM_BITS = 8
REFINE_STREAM = (1 << STREAM_BITS) - 1

PATH_MAGIC = b"NCDPATH\x00"
PATH_VERSION = 1
_PATH_HEADER = struct.Struct("<ddQqq")  # T, dt, seed, level, n_steps
QUANTUM_BITS = 47


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _check_stream(stream: int):
    if not 0 <= stream < (1 << STREAM_BITS):
        raise ValueError(f"stream must be in [0, {1 << STREAM_BITS})")


def derive_seed(master: int, sample_index: int, stream: int = 0) -> int:
    """Stateless 64-bit seed for one (sample, stream) pair under a master seed."""
    _check_stream(stream)
    if not 0 <= sample_index < (1 << (64 - STREAM_BITS)):
        raise ValueError("sample_index out of range")
    key = _mix64((master + _GOLDEN) & MASK64)
    return _mix64(key ^ ((sample_index << STREAM_BITS) | stream))


def derive_seeds(master: int, sample_indices, stream: int = 0) -> np.ndarray:
    """Vectorised :func:`derive_seed` returning ``uint64`` seeds."""
    _check_stream(stream)
    idx = np.asarray(sample_indices, dtype=np.uint64)
    key = np.uint64(_mix64((master + _GOLDEN) & MASK64))
    packed = (idx << np.uint64(STREAM_BITS)) | np.uint64(stream)
    return _mix64_array(key ^ packed)


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))


def quantum(dt: float, level: int = 0) -> float:
    """Grid spacing for increments of a path refined ``level`` times from step ``dt``."""
    root = dt * 2.0**level
    _, e = np.frexp(np.sqrt(root))
    return float(np.ldexp(1.0, int(e) - QUANTUM_BITS))


def _snap(x: np.ndarray, q: float) -> np.ndarray:
    return np.round(x / q) * q


def n_steps_for(T: float, dt: float) -> int:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if T < 0:
        raise ValueError("T must be nonnegative")
    ratio = T / dt
    N = int(round(ratio))
    if abs(ratio - N) > 1e-9:
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return N


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Increments of a scalar Wiener process on an equispaced grid."""

    dt: float
    increments: np.ndarray
    seed: int
    level: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        inc = np.array(self.increments, dtype=float).reshape(-1)
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def n_steps(self) -> int:
        return self.increments.size

    @property
    def T(self) -> float:
        return self.n_steps * self.dt

    def values(self) -> np.ndarray:
        """``B(t_j)`` for ``j = 0..N`` with ``B(0) = 0``."""
        return np.concatenate([[0.0], np.cumsum(self.increments)])

    def checksum(self) -> str:
        return hashlib.sha256(self.increments.tobytes()).hexdigest()

    def coarsen(self) -> BrownianPath:
        """Pairwise sums of increments (inverse of :func:`refine`)."""
        if self.n_steps % 2:
            raise ValueError("cannot coarsen an odd number of increments")
        inc = self.increments[0::2] + self.increments[1::2]
        return BrownianPath(2 * self.dt, inc, self.seed, max(self.level - 1, 0))

    def __eq__(self, other):
        if not isinstance(other, BrownianPath):
            return NotImplemented
        return (
            self.dt == other.dt
            and self.seed == other.seed
            and self.level == other.level
            and np.array_equal(self.increments, other.increments)
        )

    def to_bytes(self) -> bytes:
        header = _PATH_HEADER.pack(self.T, self.dt, self.seed & MASK64, self.level, self.n_steps)
        return PATH_MAGIC + bytes([PATH_VERSION]) + header + self.increments.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> BrownianPath:
        if data[:8] != PATH_MAGIC:
            raise ValueError("not a Brownian path file (bad magic)")
        if data[8] != PATH_VERSION:
            raise ValueError(f"unsupported path file version {data[8]}")
        off = 9 + _PATH_HEADER.size
        _T, dt, seed, level, n = _PATH_HEADER.unpack(data[9:off])
        inc = np.frombuffer(data[off:], dtype="<f8")
        if inc.size != n:
            raise ValueError(f"path file truncated: expected {n} increments, found {inc.size}")
        return cls(dt, inc.astype(float), seed, level)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# T={self.T!r},dt={self.dt!r},seed={self.seed},level={self.level}\n")
        buf.write("increment\n")
        for x in self.increments:
            buf.write(f"{float(x)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> BrownianPath:
        lines = text.splitlines()
        meta = dict(item.split("=", 1) for item in lines[0].lstrip("# ").split(","))
        inc = [float(line) for line in lines[2:] if line.strip()]
        return cls(float(meta["dt"]), inc, int(meta["seed"]), int(meta["level"]))

    def save(self, path, fmt: str = "bin"):
        path = Path(path)
        if fmt == "bin":
            path.write_bytes(self.to_bytes())
        elif fmt == "csv":
            path.write_text(self.to_csv())
        else:
            raise ValueError(f"unknown path format {fmt!r}")

    @classmethod
    def load(cls, path) -> BrownianPath:
        path = Path(path)
        data = path.read_bytes()
        if data[:8] == PATH_MAGIC:
            return cls.from_bytes(data)
        return cls.from_csv(data.decode())


def sample_path(T: float, dt: float, seed: int) -> BrownianPath:
    if T <= 0:
        raise ValueError("T must be positive")
    N = n_steps_for(T, dt)
    z = generator(seed).standard_normal(N)
    return BrownianPath(dt, _snap(np.sqrt(dt) * z, quantum(dt)), seed, 0)


def refine(p: BrownianPath) -> BrownianPath:
    """Halve the step by Brownian-bridge sampling of the midpoints.

    The first half-increment is drawn from ``N(dB/2, dt/4)`` and snapped to
    the path's increment grid; the second is ``dB`` minus the first.  Both lie
    on the grid, so the subtraction and the pairwise sum are exact.
    """
    dB = p.increments
    q = quantum(p.dt, p.level)
    z = generator(derive_seed(p.seed, p.level, REFINE_STREAM)).standard_normal(dB.size)
    h1 = _snap(0.5 * dB + 0.5 * np.sqrt(p.dt) * z, q)
    h2 = dB - h1
    if not np.array_equal(h1 + h2, dB):
        raise ValueError("path increments are not on the refinement grid; build paths with sample_path")
    fine = np.empty(2 * dB.size)
    fine[0::2] = h1
    fine[1::2] = h2
    return BrownianPath(p.dt / 2, fine, p.seed, p.level + 1)
