"""Joint Brownian increments ``(dW, dZ)`` and coupled multi-resolution tables.

``dZ`` is the iterated integral ``int_t^{t+h} (W_s - W_t) ds``. Over a step of
length ``h`` the pair is Gaussian with

    E[dW^2] = h,  E[dZ^2] = h^3 / 3,  E[dZ dW] = h^2 / 2.

Each path has its own Philox stream keyed by ``(seed, path index)``, so any
subset of paths can be regenerated on its own and tables do not depend on
how paths are batched.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtri

__all__ = [
    "BrownianTable",
    "IndivisibleSteps",
    "NoiseIncrement",
    "aggregate",
    "build_table",
    "coarsen",
    "increments_from_normals",
    "load_table",
    "path_stream",
    "sample_increment",
    "save_table",
    "standard_normals",
]

MAGIC = b"LSDE"
FORMAT_VERSION = 1


class IndivisibleSteps(ValueError):
    pass


@dataclass(frozen=True)
class NoiseIncrement:
    dW: float
    dZ: float
    dt: float


def path_stream(seed: int, path: int) -> np.random.Generator:
    """Independent counter-based stream for one path."""
    key = ((int(seed) & 0xFFFFFFFFFFFFFFFF) << 64) | (int(path) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


def standard_normals(stream: np.random.Generator, size) -> np.ndarray:
    """N(0, 1) variates by the inverse-CDF transform of uniform draws."""
    u = stream.random(size)
    # shift off zero so the transform stays finite
    return ndtri(u + 2.0**-54)


def increments_from_normals(U1, U2, dt: float):
    """``dW = U1 sqrt(dt)`` and ``dZ = dt (dW + U2 sqrt(dt/3)) / 2``."""
    dW = np.asarray(U1) * np.sqrt(dt)
    dZ = 0.5 * dt * (dW + np.asarray(U2) * np.sqrt(dt / 3.0))
    return dW, dZ


def sample_increment(stream: np.random.Generator, dt: float) -> NoiseIncrement:
    if dt <= 0:
        raise ValueError("dt must be positive")
    U1, U2 = standard_normals(stream, 2)
    dW, dZ = increments_from_normals(U1, U2, dt)
    return NoiseIncrement(float(dW), float(dZ), float(dt))


def aggregate(first, second):
    """Join two contiguous increments into one over the union interval.

    Works on :class:`NoiseIncrement` or on ``(dW, dZ, dt)`` array triples.
    The second piece's ``Z`` is measured from the midpoint, hence the
    ``h2 * dW1`` shift.
    """
    if isinstance(first, NoiseIncrement):
        dW, dZ, dt = aggregate(
            (first.dW, first.dZ, first.dt), (second.dW, second.dZ, second.dt)
        )
        return NoiseIncrement(float(dW), float(dZ), float(dt))
    W1, Z1, h1 = first
    W2, Z2, h2 = second
    return W1 + W2, Z1 + Z2 + h2 * W1, h1 + h2


@dataclass(frozen=True)
class BrownianTable:
    """Per-path increments on a uniform grid; arrays have shape ``(n_paths, n_steps)``."""

    seed: int
    dt: float
    dW: np.ndarray
    dZ: np.ndarray
    first_path: int = 0

    @property
    def n_paths(self) -> int:
        return self.dW.shape[0]

    @property
    def n_steps(self) -> int:
        return self.dW.shape[1]

    def increment(self, path: int, step: int) -> NoiseIncrement:
        return NoiseIncrement(float(self.dW[path, step]), float(self.dZ[path, step]), self.dt)

    def rows(self, start: int, stop: int) -> "BrownianTable":
        return BrownianTable(
            self.seed, self.dt, self.dW[start:stop], self.dZ[start:stop],
            self.first_path + start,
        )


def build_table(seed: int, dt_fine: float, n_steps: int, n_paths: int,
                first_path: int = 0) -> BrownianTable:
    """Generate paths ``first_path .. first_path + n_paths - 1`` of a seeded table.

    Step ``j`` of a path consumes the normals ``2j`` and ``2j + 1`` of the
    path's stream.
    """
    if dt_fine <= 0 or n_steps < 1 or n_paths < 1:
        raise ValueError("need dt_fine > 0, n_steps >= 1, n_paths >= 1")
    dW = np.empty((n_paths, n_steps))
    dZ = np.empty((n_paths, n_steps))
    for i in range(n_paths):
        U = standard_normals(path_stream(seed, first_path + i), 2 * n_steps)
        dW[i], dZ[i] = increments_from_normals(U[0::2], U[1::2], dt_fine)
    return BrownianTable(int(seed), float(dt_fine), dW, dZ, first_path)


def coarsen(table: BrownianTable, factor: int) -> BrownianTable:
    """Fold ``factor`` consecutive increments into one by repeated pairwise :func:`aggregate`."""
    if factor < 1 or factor & (factor - 1):
        raise ValueError("factor must be a power of two")
    if table.n_steps % factor:
        raise IndivisibleSteps(f"{table.n_steps} steps not divisible by {factor}")
    dW, dZ, h = table.dW, table.dZ, table.dt
    while factor > 1:
        dW, dZ, h = aggregate(
            (dW[:, 0::2], dZ[:, 0::2], h), (dW[:, 1::2], dZ[:, 1::2], h)
        )
        factor //= 2
    return BrownianTable(table.seed, h, np.ascontiguousarray(dW),
                         np.ascontiguousarray(dZ), table.first_path)


def save_table(table: BrownianTable, path) -> None:
    """Binary dump: magic, version u32, seed u64, n_paths u32, n_steps u32,
    dt f64, then dW and dZ as little-endian f64 in row-major order."""
    header = MAGIC + struct.pack(
        "<IQIId", FORMAT_VERSION, table.seed & 0xFFFFFFFFFFFFFFFF,
        table.n_paths, table.n_steps, table.dt,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(table.dW, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(table.dZ, dtype="<f8").tobytes())


def load_table(path) -> BrownianTable:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError("not a Brownian table file")
    version, seed, n_paths, n_steps, dt = struct.unpack_from("<IQIId", raw, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported table version {version}")
    off = 4 + struct.calcsize("<IQIId")
    count = n_paths * n_steps
    data = np.frombuffer(raw, dtype="<f8", count=2 * count, offset=off)
    dW = data[:count].reshape(n_paths, n_steps).astype(float)
    dZ = data[count:].reshape(n_paths, n_steps).astype(float)
    return BrownianTable(seed, dt, dW, dZ)
