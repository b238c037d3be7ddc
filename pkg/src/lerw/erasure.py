"""Finite-memory loop erasure, full loop erasure, loop-free points and Z(j, k).

Only loops of span at most W are erased: starting from pivot t = 0, each jump
time is the *last* visit to the pivot's point within ``[t, t + W]``, and the
next pivot is the index right after it. With W at least the path length this
is the classical (full) loop erasure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lerw import _kernels
from lerw.walk import WalkPath

INF = math.inf


@dataclass(frozen=True)
class WindowSpec:
    N: int
    alpha: float
    W: int


def window_length(N: int, alpha: float, path_len: int) -> int:
    """floor(N**alpha) clamped to ``[1, path_len]``; ``alpha = inf`` gives ``path_len``."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if path_len < 1:
        raise ValueError(f"path_len must be >= 1, got {path_len}")
    if alpha < 0 or math.isnan(alpha):
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    if math.isinf(alpha):
        return path_len
    w = _floor_pow(N, alpha)
    return max(1, min(w, path_len))


def _floor_pow(N: int, alpha: float) -> int:
    # 1024**0.4 evaluates to 15.999999999999998; snap values within 1e-9 of an integer
    x = float(N) ** alpha
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, x):
        return int(r)
    return math.floor(x)


def window_spec(N: int, alpha: float, path_len: int) -> WindowSpec:
    return WindowSpec(N=N, alpha=alpha, W=window_length(N, alpha, path_len))


@dataclass(frozen=True, eq=False)
class ErasureTrace:
    """Result of one erasure pass over a path.

    ``sigma`` holds the jump times, ``y_flags[n]`` marks surviving indices,
    ``rho[n] = y_flags[:n + 1].sum()`` and ``erased_path[i] = path[sigma[i]]``.
    """

    sigma: np.ndarray
    y_flags: np.ndarray
    rho: np.ndarray
    erased_path: np.ndarray
    W: int

    def __eq__(self, other):
        if not isinstance(other, ErasureTrace):
            return NotImplemented
        return (
            self.W == other.W
            and np.array_equal(self.sigma, other.sigma)
            and np.array_equal(self.y_flags, other.y_flags)
            and np.array_equal(self.rho, other.rho)
            and np.array_equal(self.erased_path, other.erased_path)
        )

    def check(self, path: WalkPath) -> None:
        """Assert every structural invariant of the trace against its source path."""
        pts = path.points
        s = self.sigma
        W = self.W
        assert s.size >= 1 and s[0] <= W, "sigma[0] outside the first window"
        assert np.all(np.diff(s) >= 1), "sigma not strictly increasing"
        assert np.all(s[1:] <= s[:-1] + 1 + W), "jump longer than the window"
        assert np.array_equal(pts[s[0]], pts[0]), "sigma[0] is not a visit to the origin"
        assert np.array_equal(pts[s[1:]], pts[s[:-1] + 1]), "pivot value mismatch"
        flags = np.zeros(len(pts), dtype=bool)
        flags[s] = True
        assert np.array_equal(flags, self.y_flags), "y_flags disagree with sigma"
        assert np.array_equal(np.cumsum(flags), self.rho), "rho is not the running count"
        assert np.array_equal(self.erased_path, pts[s]), "erased_path != path[sigma]"
        steps = np.abs(np.diff(self.erased_path, axis=0)).sum(axis=1)
        assert np.all(steps == 1), "erased path is not nearest-neighbour"


def _trace(path: WalkPath, sigma: np.ndarray, W: int) -> ErasureTrace:
    flags = np.zeros(len(path), dtype=bool)
    flags[sigma] = True
    return ErasureTrace(
        sigma=sigma,
        y_flags=flags,
        rho=np.cumsum(flags),
        erased_path=path.points[sigma],
        W=W,
    )


def _check_window(path: WalkPath, W: int) -> None:
    if len(path) == 0:
        raise ValueError("path must be nonempty")
    if W < 1:
        raise ValueError(f"window must be >= 1, got {W}")


def erase_windowed(path: WalkPath, W: int) -> ErasureTrace:
    """Erase every loop of span at most ``W`` (occurrence-list fast path)."""
    _check_window(path, W)
    return _trace(path, _kernels.windowed_sigma(path.points, W), W)


def erase_windowed_naive(path: WalkPath, W: int) -> ErasureTrace:
    """Same contract as :func:`erase_windowed`, by scanning each window directly."""
    _check_window(path, W)
    return _trace(path, _kernels.windowed_sigma_naive(path.points, W), W)


def erase_full(path: WalkPath) -> ErasureTrace:
    """Classical loop erasure: the windowed procedure with the window spanning the path."""
    return erase_windowed(path, len(path))


def loop_free_mask(path: WalkPath, W: int) -> np.ndarray:
    """``mask[n]`` is True iff no loop ``i < j``, ``j - i <= W`` has ``i <= n <= j``."""
    _check_window(path, W)
    return _kernels.loop_free(path.points, W)


def z_indicator(mask, j: int, k: int) -> bool:
    """True iff ``mask`` holds no loop-free index in ``[j, k]``."""
    mask = np.asarray(mask, dtype=bool)
    if not 0 <= j <= k < mask.size:
        raise IndexError(f"need 0 <= j <= k < {mask.size}, got j={j}, k={k}")
    return not bool(mask[j : k + 1].any())
