"""Exponential shells, cubes and skeleton lattices.

Shells use ``V_n = [-e^n, e^n)^d`` with ``S_0 = V_0`` and
``S_{n+1} = V_{n+1} \\ V_n``.  All shell-boundary comparisons use the
same table of ``math.exp(n)`` values so that scalar and vectorized
membership agree exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import DomainError, InvalidRange, SizeCapExceeded

__all__ = [
    "Cube",
    "exp_n",
    "shell_of",
    "shell_index",
    "shell_bounds",
    "in_shell",
    "skeleton_axis",
    "skeleton_count",
    "skeleton_points",
    "subskeleton_in_cube",
    "SubSkeleton",
    "block_set_points",
    "POINT_CAP",
]

POINT_CAP = 2_000_000
_MAX_SHELL = 700


@lru_cache(maxsize=None)
def exp_n(n: int) -> float:
    """``e^n`` as the single float used for every shell comparison."""
    return math.exp(n)


_EXP_TABLE = np.array([exp_n(n) for n in range(_MAX_SHELL + 1)])


@dataclass(frozen=True)
class Cube:
    """Half-open cube ``Q(x, r) = [x, x + r)^d`` with side ``r ≥ 1``."""

    corner: tuple
    side: float

    def __post_init__(self):
        corner = tuple(float(c) for c in np.atleast_1d(np.asarray(self.corner, dtype=float)))
        object.__setattr__(self, "corner", corner)
        if not self.side >= 1:
            raise DomainError(f"cube side must be at least 1, got {self.side}")

    @property
    def d(self) -> int:
        return len(self.corner)

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.asarray(self.corner)
        return np.all((pts >= lo) & (pts < lo + self.side), axis=1)


def _axis_shell(coords: np.ndarray) -> np.ndarray:
    """Smallest ``n`` with ``-e^n ≤ c < e^n`` per coordinate."""
    c = np.asarray(coords, dtype=float)
    mag = np.abs(c)
    with np.errstate(divide="ignore"):
        guess = np.where(mag > 1, np.floor(np.log(np.maximum(mag, 1.0))), 0).astype(np.int64)
    guess = np.clip(guess, 0, _MAX_SHELL - 1)
    # exact correction against the shared exp table
    for _ in range(2):
        lower = _EXP_TABLE[np.maximum(guess - 1, 0)]
        upper = _EXP_TABLE[guess]
        inside = np.where(c >= 0, c < upper, -c <= upper)
        below = np.where(c >= 0, c < lower, -c <= lower) & (guess > 0)
        guess = np.where(~inside, guess + 1, np.where(below, guess - 1, guess))
    if np.any(guess > _MAX_SHELL):
        raise DomainError("coordinate beyond the supported shell range")
    return guess


def shell_index(points) -> np.ndarray:
    """Vectorized :func:`shell_of` over an ``(m, d)`` array (or 1-D coordinates)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        return _axis_shell(pts)
    return _axis_shell(pts).max(axis=1)


def shell_of(x) -> int:
    """Index ``n`` of the shell ``S_n`` containing ``x``."""
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    return int(_axis_shell(pts).max())


def shell_bounds(n: int) -> tuple[float, float]:
    """``(e^{n-1}, e^n)``: ``S_n`` is ``V_n`` minus ``V_{n-1}`` (``(0, 1)`` for n = 0)."""
    if n < 0:
        raise DomainError("shell index must be nonnegative")
    return (0.0 if n == 0 else exp_n(n - 1)), exp_n(n)


def in_shell(points, n: int) -> np.ndarray:
    return shell_index(points) == n


def _anchor_limit(n: int, theta: float) -> int:
    return int(math.floor(math.exp(n * (1.0 - theta))))


def skeleton_axis(n: int, theta: float) -> np.ndarray:
    """Per-axis anchors ``e^n + j e^{nθ}``, ``j = 0..⌊e^{n(1-θ)}⌋``."""
    if n < 1:
        raise DomainError("skeleton index must be at least 1")
    if not 0 < theta < 1:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    j = np.arange(_anchor_limit(n, theta) + 1)
    return exp_n(n) + j * math.exp(n * theta)


def skeleton_count(n: int, theta: float, d: int) -> int:
    return (_anchor_limit(n, theta) + 1) ** d


def skeleton_points(n: int, theta: float, d: int, cap: int = POINT_CAP) -> np.ndarray:
    """Cartesian product of the per-axis anchors, shape ``(count, d)``."""
    count = skeleton_count(n, theta, d)
    if count > cap:
        raise SizeCapExceeded(f"skeleton has {count} points, cap is {cap}")
    axis = skeleton_axis(n, theta)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    return np.column_stack([g.ravel() for g in grids])


@dataclass(frozen=True)
class SubSkeleton:
    points: np.ndarray
    count: int
    target: float
    constant: float
    separation: float


def _thinned_axis(lo: float, width: float, base: float, step: float) -> np.ndarray:
    """Lattice ``base + j·step`` (j ≥ 0) inside ``[lo, lo + width)``.

    Points are generated by repeated addition, nudged up by one ulp where
    rounding would leave a gap below ``step``, so separation holds exactly.
    """
    j0 = max(0, math.ceil((lo - base) / step))
    x = base + j0 * step
    while x < lo:
        x = np.nextafter(x, math.inf)
    kept = []
    while x < lo + width:
        kept.append(x)
        nxt = x + step
        while nxt - x < step:
            nxt = np.nextafter(nxt, math.inf)
        x = nxt
    return np.asarray(kept, dtype=float)


def subskeleton_in_cube(n: int, delta: float, cube: Cube, theta: Optional[float] = None, cap: int = POINT_CAP) -> SubSkeleton:
    """Points of the δ-skeleton lattice inside ``cube``, pairwise ``≥ e^{nδ}`` apart.

    ``cube`` is ``Q(x, e^{nθ})``; ``theta`` defaults to ``log(side)/n``.
    The per-axis lattice is ``e^n + j e^{nδ}`` for all ``j ≥ 0``, built so
    that consecutive points differ by at least ``e^{nδ}`` in floating
    point.  ``constant`` is the smallest ``c`` with
    ``count ∈ [target/c, c·target]`` where ``target = e^{nd(θ-δ)}``.
    """
    if theta is None:
        theta = math.log(cube.side) / n
    if not 0 < delta < 1 or not 0 < theta < 1:
        raise InvalidRange(f"need 0 < delta < theta < 1, got delta={delta}, theta={theta}")
    if delta >= theta:
        raise InvalidRange(f"delta={delta} must be smaller than theta={theta}")
    step = math.exp(n * delta)
    axes = [_thinned_axis(lo, cube.side, exp_n(n), step) for lo in cube.corner]
    count = int(np.prod([a.size for a in axes]))
    if count > cap:
        raise SizeCapExceeded(f"sub-skeleton has {count} points, cap is {cap}")
    if count:
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([g.ravel() for g in grids])
    else:
        pts = np.empty((0, cube.d))
    target = math.exp(n * cube.d * (theta - delta))
    const = max(count / target, target / count) if count else math.inf
    return SubSkeleton(pts, count, target, const, step)


def block_set_points(n: int, q: float, k: int, d: int, spacing: float = 1.0, cap: int = POINT_CAP) -> np.ndarray:
    """Lattice sample of ``(0, e^{n/q}]^k × (e^{n/q}, e^{n+1}]^{d+1-k}``.

    The ambient dimension is ``d + 1``; coordinates are positive multiples
    of ``spacing``.
    """
    if n < 1:
        raise DomainError("block index must be at least 1")
    if q <= 1:
        raise DomainError("q must exceed 1")
    if not 1 <= k <= d + 1:
        raise DomainError(f"k must lie in [1, {d + 1}]")
    if spacing <= 0:
        raise DomainError("spacing must be positive")
    inner = math.exp(n / q)
    outer = math.exp(n + 1)
    j = np.arange(1, math.floor(outer / spacing) + 2) * spacing
    low = j[j <= inner]
    high = j[(j > inner) & (j <= outer)]
    axes = [low] * k + [high] * (d + 1 - k)
    count = int(np.prod([a.size for a in axes]))
    if count > cap:
        raise SizeCapExceeded(f"block set has {count} points, cap is {cap}")
    if count == 0:
        return np.empty((0, d + 1))
    grids = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.ravel() for g in grids])

