"""Shell covering costs and macroscopic dimension estimators.

``nu_n_rho`` computes ``inf Σ (s(Q_i)/e^n)^ρ`` over covers of the part of
a finite point set lying in the shell ``S_n`` by cubes of side ``≥ 1``
contained in ``S_n``.  In one dimension the infimum is computed exactly by
dynamic programming over sorted points; in higher dimensions an optimal
cover within a dyadic tile hierarchy gives an upper bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .errors import DomainError, InsufficientShells
from .geometry import Cube, exp_n, shell_index, skeleton_axis

__all__ = [
    "CoveringResult",
    "SeriesResult",
    "DimensionEstimate",
    "ThicknessReport",
    "nu_n_rho",
    "covering_series",
    "classify_trend",
    "estimate_dim_counting",
    "estimate_dim_bisection",
    "shell_counts",
    "slope_from_counts",
    "thickness_test",
    "SUMMABLE",
    "DIVERGENT",
    "INCONCLUSIVE",
]

SUMMABLE = "SummableTrend"
DIVERGENT = "DivergentTrend"
INCONCLUSIVE = "Inconclusive"

EXACT_DP = "ExactDP"
GREEDY = "Greedy"


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise DomainError("points must be an (m, d) array")
    return pts


def _outside_unit_ball(pts: np.ndarray) -> np.ndarray:
    """Points with Euclidean norm strictly above e."""
    return pts[np.linalg.norm(pts, axis=1) > math.e]


@dataclass(frozen=True)
class CoveringResult:
    n: int
    rho_dim: float
    value: float
    cubes: tuple
    method: str

    @property
    def n_cubes(self) -> int:
        return len(self.cubes)


# ---------------------------------------------------------------------------
# one dimension: exact DP


def _component_cover(x: np.ndarray, scale: float, rho: float):
    """Optimal runs for sorted ``x`` lying in one interval component of a shell.

    Returns ``(cost, runs)`` where ``runs`` are ``(first, last)`` index pairs.
    """
    m = x.size
    best = np.zeros(m + 1)
    count = np.zeros(m + 1, dtype=np.int64)
    start = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, m + 1):
        spans = x[i - 1] - x[:i]
        cand = best[:i] + (np.maximum(spans, 1.0) * scale) ** rho
        low = cand.min()
        ties = np.flatnonzero(cand == low)
        j = ties[np.argmin(count[ties])] if ties.size > 1 else ties[0]
        best[i] = low
        count[i] = count[j] + 1
        start[i] = j
    runs = []
    i = m
    while i > 0:
        j = int(start[i])
        runs.append((j, i - 1))
        i = j
    return float(best[m]), runs[::-1]


def _nu_1d(x: np.ndarray, n: int, rho: float) -> CoveringResult:
    en = exp_n(n)
    scale = 1.0 / en
    if n == 0:
        comps = [(-1.0, 1.0)]
    else:
        inner = exp_n(n - 1)
        comps = [(-en, -inner), (inner, en)]
    x = np.sort(x)
    cubes, parts = [], []
    for lo, hi in comps:
        sel = x[(x >= lo) & (x < hi)]
        if sel.size == 0:
            continue
        cost, runs = _component_cover(sel, scale, rho)
        parts.append(cost)
        for a, b in runs:
            side = max(1.0, float(sel[b] - sel[a]))
            corner = min(float(sel[a]), hi - side)
            cubes.append(Cube((max(corner, lo),), side))
    total = math.fsum(parts)
    return CoveringResult(n, rho, total, tuple(cubes), EXACT_DP)


# ---------------------------------------------------------------------------
# d >= 2: dyadic tile hierarchy


def _shell_boxes(n: int, d: int):
    """Disjoint boxes ``(lo, hi)`` whose union is ``S_n``."""
    en = exp_n(n)
    if n == 0:
        return [(np.full(d, -1.0), np.full(d, 1.0))]
    inner = exp_n(n - 1)
    boxes = []
    for axis in range(d):
        for sign in (-1, 1):
            lo = np.full(d, -en)
            hi = np.full(d, en)
            lo[:axis] = -inner
            hi[:axis] = inner
            if sign < 0:
                lo[axis], hi[axis] = -en, -inner
            else:
                lo[axis], hi[axis] = inner, en
            boxes.append((lo, hi))
    return boxes


def _box_cover(pts: np.ndarray, lo: np.ndarray, hi: np.ndarray, scale: float, rho: float):
    """Optimal cover by cells of a halving hierarchy of tiles fitting inside the box.

    Root tiles have the box's shortest side, so the hierarchy scales with
    the shell; halving stops at leaves of side in ``[1, 2)``.  A leaf whose
    points span less than 1 on every axis costs one unit cube.
    """
    width = hi - lo
    root = float(width.min())
    levels = int(math.floor(math.log2(root)))
    leaf = root / 2.0**levels
    n_tiles = np.ceil(width / root - 1e-12).astype(np.int64)
    tile_idx = np.minimum(np.floor((pts - lo) / root).astype(np.int64), n_tiles - 1)
    # the last tile on each axis is shifted back to end at the box edge
    tile_start = np.where(tile_idx == n_tiles - 1, hi - root, lo + tile_idx * root)
    local = np.clip(np.floor((pts - tile_start) / leaf).astype(np.int64), 0, 2**levels - 1)
    tile_flat = np.ravel_multi_index(tile_idx.T, n_tiles)

    keys, leaf_of = np.unique(np.column_stack([tile_flat, local]), axis=0, return_inverse=True)
    leaf_of = leaf_of.ravel()
    pmin = np.full((keys.shape[0], pts.shape[1]), np.inf)
    pmax = np.full((keys.shape[0], pts.shape[1]), -np.inf)
    np.minimum.at(pmin, leaf_of, pts)
    np.maximum.at(pmax, leaf_of, pts)
    # a leaf whose points fit strictly inside a unit cube is covered by that cube
    unit = np.max(pmax - pmin, axis=1) < 1.0
    cost = np.where(unit, scale**rho, (leaf * scale) ** rho)
    leaf_unit = {tuple(k): pmin[i] for i, k in enumerate(keys) if unit[i]}
    level_keys, level_cost, level_split = [keys], [cost], [np.zeros(keys.shape[0], dtype=bool)]
    for lev in range(1, levels + 1):
        parent = keys.copy()
        parent[:, 1:] >>= 1
        pkeys, inv = np.unique(parent, axis=0, return_inverse=True)
        child_sum = np.zeros(pkeys.shape[0])
        np.add.at(child_sum, inv.ravel(), cost)
        whole = (leaf * 2.0**lev * scale) ** rho
        split = child_sum < whole
        cost = np.where(split, child_sum, whole)
        keys = pkeys
        level_keys.append(keys)
        level_cost.append(cost)
        level_split.append(split)

    cubes = []
    origins = {}

    def tile_origin(flat):
        if flat not in origins:
            idx = np.array(np.unravel_index(flat, n_tiles))
            origins[flat] = np.where(idx == n_tiles - 1, hi - root, lo + idx * root)
        return origins[flat]

    active = {tuple(k) for k in level_keys[levels]}
    for lev in range(levels, -1, -1):
        nxt = set()
        side = leaf * 2.0**lev
        for row, sp in zip(level_keys[lev], level_split[lev]):
            key = tuple(row)
            if key not in active:
                continue
            if sp:
                nxt.add(key)
            else:
                corner = tile_origin(key[0]) + np.asarray(key[1:], dtype=float) * side
                if lev == 0 and key in leaf_unit:
                    # the unit cube stays inside its leaf tile, hence inside the shell
                    cubes.append(Cube(tuple(np.minimum(leaf_unit[key], corner + side - 1.0)), 1.0))
                else:
                    cubes.append(Cube(tuple(corner), side))
        if lev > 0:
            children = level_keys[lev - 1]
            parents = children.copy()
            parents[:, 1:] >>= 1
            active = {tuple(c) for c, p in zip(children, parents) if tuple(p) in nxt}
    return float(math.fsum(level_cost[levels])), cubes


def _nu_tree(pts: np.ndarray, n: int, rho: float) -> CoveringResult:
    scale = 1.0 / exp_n(n)
    parts, cubes = [], []
    for lo, hi in _shell_boxes(n, pts.shape[1]):
        sel = pts[np.all((pts >= lo) & (pts < hi), axis=1)]
        if sel.shape[0] == 0:
            continue
        cost, cb = _box_cover(sel, lo, hi, scale, rho)
        parts.append(cost)
        cubes.extend(cb)
    return CoveringResult(n, rho, math.fsum(parts), tuple(cubes), GREEDY)


def nu_n_rho(points, n: int, rho_dim: float) -> CoveringResult:
    """Covering cost ``ν^n_ρ`` of ``points ∩ S_n``.

    Exact for ``d = 1`` (method ``ExactDP``); an upper bound from the best
    cover by dyadic tiles for ``d ≥ 2`` (method ``Greedy``).
    """
    if rho_dim <= 0:
        raise DomainError("rho_dim must be positive")
    if n < 0:
        raise DomainError("shell index must be nonnegative")
    pts = _as_points(points)
    d = pts.shape[1]
    if pts.shape[0]:
        pts = pts[shell_index(pts) == n]
    if pts.shape[0] == 0:
        return CoveringResult(n, rho_dim, 0.0, (), EXACT_DP if d == 1 else GREEDY)
    if d == 1:
        return _nu_1d(pts[:, 0], n, rho_dim)
    return _nu_tree(pts, n, rho_dim)


# ---------------------------------------------------------------------------
# series trend


@dataclass(frozen=True)
class SeriesResult:
    rho_dim: float
    ns: tuple
    values: tuple
    trend: str
    slope: float
    rms: float
    fit_ns: tuple
    method: str


def classify_trend(ns, values, threshold: float = 0.1, fit_tol: float = 0.25):
    """Classify ``Σ_n values[n]`` from a log-linear fit over the final half.

    Returns ``(trend, slope, rms, fit_ns)``.  A slope below ``-threshold``
    is summable; above ``+threshold`` divergent.  A flat fit with small
    residuals means terms stay at a positive level, hence divergent.  A
    final half that is at least half zeros is summable.
    """
    ns = np.asarray(ns, dtype=float)
    vals = np.asarray(values, dtype=float)
    half = ns.size // 2
    tail_n, tail_v = ns[half:], vals[half:]
    if np.all(vals == 0):
        return SUMMABLE, -math.inf, 0.0, tuple(tail_n)
    pos = tail_v > 0
    if pos.sum() * 2 <= tail_v.size:
        return SUMMABLE, -math.inf, math.nan, tuple(tail_n)
    xs, ys = tail_n[pos], np.log(tail_v[pos])
    slope, icpt = np.polyfit(xs, ys, 1)
    rms = float(np.sqrt(np.mean((ys - (slope * xs + icpt)) ** 2)))
    if slope < -threshold:
        trend = SUMMABLE
    elif slope > threshold:
        trend = DIVERGENT
    elif rms <= fit_tol and pos.all():
        trend = DIVERGENT
    else:
        trend = INCONCLUSIVE
    return trend, float(slope), rms, tuple(xs)


def covering_series(points, rho_dim: float, n_max: int, threshold: float = 0.1, fit_tol: float = 0.25) -> SeriesResult:
    """``ν^n_ρ`` for ``n = 1..n_max`` and the trend of their sum.

    Points with norm at most ``e`` are dropped first.
    """
    if n_max < 4:
        raise DomainError("n_max must be at least 4")
    pts = _outside_unit_ball(_as_points(points))
    shells = shell_index(pts) if pts.shape[0] else np.empty(0, dtype=np.int64)
    ns = list(range(1, n_max + 1))
    vals, method = [], EXACT_DP if pts.shape[1] == 1 else GREEDY
    for n in ns:
        res = nu_n_rho(pts[shells == n], n, rho_dim)
        vals.append(res.value)
    trend, slope, rms, fit_ns = classify_trend(ns, vals, threshold, fit_tol)
    return SeriesResult(rho_dim, tuple(ns), tuple(vals), trend, slope, rms, fit_ns, method)


# ---------------------------------------------------------------------------
# estimators


@dataclass(frozen=True)
class DimensionEstimate:
    method: str
    value: float
    uncertainty: float = 0.0
    diagnostics: dict = field(default_factory=dict)
    replicates: dict = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "value": self.value,
            "uncertainty": self.uncertainty,
            "diagnostics": self.diagnostics,
            "replicates": self.replicates,
        }


def shell_counts(points, n_lo: int, n_hi: int) -> np.ndarray:
    """Number of distinct unit cubes ``floor(x)`` hit in each shell ``n_lo..n_hi``."""
    pts = _outside_unit_ball(_as_points(points))
    out = np.zeros(n_hi - n_lo + 1, dtype=np.int64)
    if pts.shape[0] == 0:
        return out
    shells = shell_index(pts)
    keep = (shells >= n_lo) & (shells <= n_hi)
    cells = np.floor(pts[keep]).astype(np.int64)
    uniq = np.unique(np.column_stack([shells[keep], cells]), axis=0)
    np.add.at(out, uniq[:, 0] - n_lo, 1)
    return out


def slope_from_counts(ns, counts, d: int) -> DimensionEstimate:
    """Least-squares slope of ``log count`` against ``n`` over non-empty shells, clamped to ``[0, d]``."""
    ns = np.asarray(ns, dtype=float)
    counts = np.asarray(counts, dtype=float)
    used = counts > 0
    if used.sum() < 3:
        raise InsufficientShells(f"only {int(used.sum())} non-empty shells; need 3")
    xs, ys = ns[used], np.log(counts[used])
    slope, icpt = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + icpt)
    if used.sum() > 2:
        se = float(np.sqrt(np.sum(resid**2) / (used.sum() - 2) / np.sum((xs - xs.mean()) ** 2)))
    else:
        se = math.nan
    diag = {
        "fit_ns": xs.astype(int).tolist(),
        "counts": counts.tolist(),
        "ns": ns.astype(int).tolist(),
        "raw_slope": float(slope),
        "residuals": resid.tolist(),
    }
    return DimensionEstimate("CountingSlope", float(min(max(slope, 0.0), d)), se, diag)


def estimate_dim_counting(points, n_range: Sequence[int], d: Optional[int] = None) -> DimensionEstimate:
    """Slope of the per-shell unit-cube counts (an upper-bound estimator)."""
    pts = _as_points(points)
    d = d or pts.shape[1]
    n_lo, n_hi = int(n_range[0]), int(n_range[-1])
    counts = shell_counts(pts, n_lo, n_hi)
    return slope_from_counts(np.arange(n_lo, n_hi + 1), counts, d)


def estimate_dim_bisection(
    points,
    n_max: int,
    tolerance: float = 0.02,
    d: Optional[int] = None,
    flat_band: float = 0.02,
    fit_tol: float = 0.25,
) -> DimensionEstimate:
    """Bisect ``ρ`` on the covering-series trend.

    Two brackets are refined: the largest ``ρ`` seen divergent and the
    smallest seen summable.  Inconclusive trends count as neither, so they
    widen the final interval rather than being guessed.  The value is the
    midpoint of the resulting interval and the uncertainty its half-width
    plus ``tolerance``.  In ``d ≥ 2`` the covers are upper bounds, so the
    estimate is one-sided (``≤``).
    """
    pts = _outside_unit_ball(_as_points(points))
    d = d or _as_points(points).shape[1]
    shells = shell_index(pts) if pts.shape[0] else np.empty(0, dtype=np.int64)
    nonempty = len(set(shells[(shells >= 1) & (shells <= n_max)].tolist()))
    if nonempty < 3:
        raise InsufficientShells(f"only {nonempty} non-empty shells up to {n_max}; need 3")
    cache: dict[float, SeriesResult] = {}

    def trend(rho):
        if rho not in cache:
            cache[rho] = covering_series(pts, rho, n_max, flat_band, fit_tol)
        return cache[rho].trend

    # sup of divergent ρ
    lo, hi = 0.0, float(d)
    if trend(hi) == DIVERGENT:
        lo = hi
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if trend(mid) == DIVERGENT:
            lo = mid
        else:
            hi = mid
    div_sup = lo
    # inf of summable ρ
    lo, hi = 0.0, float(d)
    if trend(hi) != SUMMABLE:
        lo = hi
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if trend(mid) == SUMMABLE:
            hi = mid
        else:
            lo = mid
    sum_inf = hi
    lower, upper = min(div_sup, sum_inf), max(div_sup, sum_inf)
    value = min(max(0.5 * (lower + upper), 0.0), float(d))
    diag = {
        "divergent_sup": div_sup,
        "summable_inf": sum_inf,
        "n_max": n_max,
        "one_sided": d >= 2,
        "trials": {f"{r:.6f}": cache[r].trend for r in sorted(cache)},
    }
    return DimensionEstimate("SeriesBisection", value, 0.5 * (upper - lower) + tolerance, diag)


# ---------------------------------------------------------------------------
# thickness


@dataclass(frozen=True)
class ThicknessReport:
    theta: float
    ns: tuple
    occupancy: tuple
    first_full: Optional[int]
    d: int = 1

    @property
    def certified_lower_bound(self) -> Optional[float]:
        """``d(1-θ)`` when full occupancy holds from ``first_full`` to the end of the range."""
        return None if self.first_full is None else self.d * (1.0 - self.theta)

    def as_dict(self) -> dict[str, Any]:
        return {
            "theta": self.theta,
            "ns": list(self.ns),
            "occupancy": list(self.occupancy),
            "first_full": self.first_full,
            "certified_lower_bound": self.certified_lower_bound,
        }


def _skeleton_cells(coords: np.ndarray, n: int, theta: float) -> np.ndarray:
    """Skeleton-cube index per coordinate, ``-1`` where no cube contains it.

    Rounding can make neighbouring cubes overlap by an ulp; the cube with
    the larger index wins, so every anchor maps to its own cube.
    """
    anchors = skeleton_axis(n, theta)
    step = math.exp(n * theta)
    j = np.floor((coords - anchors[0]) / step).astype(np.int64)
    j = np.clip(j, -1, anchors.size)
    out = np.full(coords.shape, -1, dtype=np.int64)
    for shift in (1, 0, -1):
        cand = j + shift
        ok = (cand >= 0) & (cand < anchors.size) & (out < 0)
        idx = np.where(ok, cand, 0)
        hit = ok & (coords >= anchors[idx]) & (coords < anchors[idx] + step)
        out = np.where(hit, cand, out)
    return out


def thickness_test(points, theta: float, n_range: Sequence[int]) -> ThicknessReport:
    """Fraction of skeleton cubes ``Q(x, e^{nθ})`` hit, per shell index ``n``."""
    if not 0 < theta < 1:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    pts = _as_points(points)
    d = pts.shape[1]
    ns = list(range(int(n_range[0]), int(n_range[-1]) + 1))
    occ = []
    for n in ns:
        per_axis = skeleton_axis(n, theta).size
        if pts.shape[0] == 0:
            occ.append(0.0)
            continue
        cells = _skeleton_cells(pts, n, theta)
        cells = cells[np.all(cells >= 0, axis=1)]
        hit = np.unique(cells, axis=0).shape[0] if cells.size else 0
        occ.append(hit / per_axis**d)
    first = None
    for i in range(len(ns) - 1, -1, -1):
        if occ[i] == 1.0:
            first = ns[i]
        else:
            break
    return ThicknessReport(theta, tuple(ns), tuple(occ), first, d)
