"""Splittable random streams and simple random walks on Z^d."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lerw import _kernels

DEFAULT_DIM = 3
PATH_CAP = 2**26  # max points per materialised path


class RngStream:
    """A counter-based (Philox 4x64) stream keyed by ``(master_seed, stream_index)``.

    The key is derived through :class:`numpy.random.SeedSequence` with the
    stream index as spawn key, so distinct indices give independent streams and
    the pair fully determines the output. One *draw* is one raw 64-bit output.
    """

    def __init__(self, master_seed: int, stream_index: int):
        if not 0 <= master_seed < 2**64:
            raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {master_seed}")
        if stream_index < 0:
            raise ValueError(f"stream_index must be non-negative, got {stream_index}")
        self.master_seed = int(master_seed)
        self.stream_index = int(stream_index)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        self._bitgen = np.random.Philox(seq)
        self.generator = np.random.Generator(self._bitgen)

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, stream_index={self.stream_index})"

    @property
    def counter(self) -> np.ndarray:
        return self._bitgen.state["state"]["counter"].copy()

    def raw(self, size: int) -> np.ndarray:
        return self._bitgen.random_raw(size)

    def uniform(self, size: int) -> np.ndarray:
        """Doubles in [0, 1) built from the top 53 bits of each draw."""
        return (self.raw(size) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def derive_stream(master_seed: int, stream_index: int) -> RngStream:
    return RngStream(master_seed, stream_index)


@dataclass(frozen=True, eq=False)
class WalkPath:
    """A finite trajectory; ``points[k]`` is S_k and ``points[0]`` is the origin."""

    points: np.ndarray

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_steps(self) -> int:
        return self.points.shape[0] - 1

    def __len__(self) -> int:
        return self.points.shape[0]

    def check(self) -> None:
        """Raise ``ValueError`` unless the path starts at 0 with unit L1 increments."""
        if np.any(self.points[0] != 0):
            raise ValueError("path does not start at the origin")
        steps = np.abs(np.diff(self.points, axis=0)).sum(axis=1)
        if np.any(steps != 1):
            raise ValueError("path has a non-unit increment")


def as_path(points) -> WalkPath:
    """Wrap a sequence of lattice points, validating the walk invariants."""
    pts = np.asarray(points, dtype=np.int64)
    if pts.ndim == 1:
        pts = pts[:, None]
    path = WalkPath(np.ascontiguousarray(pts))
    path.check()
    return path


def _check_dim(dim: int) -> None:
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")


def sample_step(rng: RngStream, dim: int = DEFAULT_DIM) -> np.ndarray:
    """One uniform nearest-neighbour step: a length-``dim`` vector with a single ±1."""
    _check_dim(dim)
    return _kernels.steps_to_path(rng.raw(1), dim)[1]


def generate_walk(rng: RngStream, n_steps: int, dim: int = DEFAULT_DIM) -> WalkPath:
    """An ``n_steps``-step SRW from the origin, consuming exactly ``n_steps`` draws.

    Because each step uses one draw, a longer walk from a fresh copy of the
    same stream extends a shorter one.
    """
    _check_dim(dim)
    if n_steps < 0:
        raise ValueError(f"n_steps must be non-negative, got {n_steps}")
    if n_steps + 1 > PATH_CAP:
        raise ValueError(f"path of {n_steps + 1} points exceeds cap {PATH_CAP}")
    raw = rng.raw(n_steps) if n_steps else np.empty(0, dtype=np.uint64)
    return WalkPath(_kernels.steps_to_path(raw, dim))
