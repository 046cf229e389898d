"""Gaussian tail bounds and their Monte Carlo counterparts.

``borell_tis_bound`` is the sub-Gaussian bound for the supremum of a
unit-variance field over a unit cube.  ``lopes_bound`` bounds the lower
tail of the maximum of ``n`` Gaussians with pairwise correlation at most
``ρ0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .errors import DomainError, RangeError, SizeCapExceeded
from .fieldgen import CholeskySampler, Correlation
from .rng import substream

__all__ = [
    "BorellParams",
    "LopesParams",
    "borell_tis_bound",
    "cube_mesh",
    "sample_cube_maxima",
    "estimate_mu",
    "tail_frequency",
    "lopes_constants",
    "lopes_bound",
    "lopes_level",
    "calibrate_lopes",
    "empirical_max_lower_tail",
    "MaxTailEstimate",
    "lower_tail_table",
    "DEFAULT_MESH",
    "BATCH",
]

DEFAULT_MESH = 17
BATCH = 4096
MAX_N = 1 << 24


@dataclass(frozen=True)
class BorellParams:
    mu: float
    stderr: float = 0.0
    replicates: int = 0

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise DomainError("mu must be finite")


def borell_tis_bound(x: float, params) -> float:
    """``min(1, 2 exp(-x²/2 + μx))`` for ``x ≥ μ``."""
    mu = params.mu if isinstance(params, BorellParams) else float(params)
    if x < mu:
        raise RangeError(f"bound holds for x >= mu; got x={x}, mu={mu}")
    return min(1.0, 2.0 * math.exp(-0.5 * x * x + mu * x))


def cube_mesh(anchor, mesh: int = DEFAULT_MESH) -> np.ndarray:
    """``mesh`` points per axis spanning ``[a, a+1]``; a single point when ``mesh = 1``."""
    a = np.atleast_1d(np.asarray(anchor, dtype=float))
    if mesh < 1:
        raise DomainError("mesh must be at least 1")
    axis = [np.array([ai]) if mesh == 1 else np.linspace(ai, ai + 1.0, mesh) for ai in a]
    grids = np.meshgrid(*axis, indexing="ij")
    return np.column_stack([g.ravel() for g in grids])


def sample_cube_maxima(corr: Correlation, anchor, mesh: int, replicates: int, seed: int) -> np.ndarray:
    """Per-replicate maximum of the field over the meshed unit cube.

    Replicates are drawn in fixed batches, each from its own substream, so
    results do not depend on how batches are scheduled.
    """
    sampler = CholeskySampler(corr, cube_mesh(anchor, mesh))
    k = sampler.points.shape[0]
    out = np.empty(replicates)
    for b, start in enumerate(range(0, replicates, BATCH)):
        m = min(BATCH, replicates - start)
        noise = substream(seed, b).standard_normal((m, k))
        out[start : start + m] = (noise @ sampler.factor.T).max(axis=1)
    return out


def estimate_mu(corr: Correlation, anchor, mesh: int = DEFAULT_MESH, replicates: int = 10_000, seed: int = 0) -> BorellParams:
    """Monte Carlo estimate of ``E sup`` over the meshed cube ``Q(a, 1)``."""
    maxima = sample_cube_maxima(corr, anchor, mesh, replicates, seed)
    mean = math.fsum(maxima) / replicates
    sd = math.sqrt(math.fsum((maxima - mean) ** 2) / max(replicates - 1, 1))
    return BorellParams(mean, sd / math.sqrt(replicates), replicates)


def tail_frequency(maxima: np.ndarray, x: float) -> tuple[float, float]:
    """Empirical ``P{max ≥ x}`` and its binomial standard error."""
    p = float(np.count_nonzero(maxima >= x)) / maxima.size
    return p, math.sqrt(max(p * (1 - p), 0.0) / maxima.size)


@dataclass(frozen=True)
class LopesParams:
    rho0: float
    gamma0: float
    alpha0: float
    beta0: float


def lopes_constants(rho0: float, gamma0: float) -> LopesParams:
    """``α0 = (1-ρ0)(1-√γ0)²/ρ0`` and ``β0 = (1-ρ0)(1-√γ0)/ρ0``."""
    if not (0 < rho0 < 1 and 0 < gamma0 < 1):
        raise DomainError(f"rho0 and gamma0 must lie in (0, 1); got {rho0}, {gamma0}")
    root = 1.0 - math.sqrt(gamma0)
    beta0 = (1.0 - rho0) * root / rho0
    return LopesParams(rho0, gamma0, beta0 * root, beta0)


def lopes_bound(n: float, params: LopesParams, C: float = 1.0) -> float:
    """``C n^{-α0} (log n)^{(β0-1)/2}``."""
    if n < 2:
        raise DomainError("n must be at least 2")
    if C <= 0:
        raise DomainError("C must be positive")
    return C * n ** (-params.alpha0) * math.log(n) ** ((params.beta0 - 1.0) / 2.0)


def lopes_level(n: int, rho0: float, gamma0: float) -> float:
    """Threshold ``√(2 γ0 (1-ρ0) log n)``."""
    return math.sqrt(2.0 * gamma0 * (1.0 - rho0) * math.log(n))


def calibrate_lopes(n0: int, p0: float, params: LopesParams) -> float:
    """Constant ``C`` making the bound equal ``p0`` at ``n0``."""
    return p0 / lopes_bound(n0, params, 1.0)


@dataclass(frozen=True)
class MaxTailEstimate:
    n: int
    probability: float
    stderr: float
    replicates: int


def _iid_max(gen: np.random.Generator, n: int, m: int, method: str) -> np.ndarray:
    if method == "exact":
        # max of n iid N(0,1) is Φ^{-1}(U^{1/n}); use the upper tail for precision
        u = gen.random(m)
        q = -np.expm1(np.log(u) / n)
        return -special.ndtri(q)
    out = np.full(m, -np.inf)
    chunk = max(1, (1 << 22) // max(m, 1))
    for start in range(0, n, chunk):
        k = min(chunk, n - start)
        out = np.maximum(out, gen.standard_normal((m, k)).max(axis=1))
    return out


def empirical_max_lower_tail(
    n: int,
    rho0: float,
    gamma0: float,
    replicates: int = 100_000,
    seed: int = 0,
    method: str = "exact",
    cap: int = MAX_N,
) -> MaxTailEstimate:
    """Monte Carlo ``P{max_i X_i ≤ √(2γ0(1-ρ0) log n)}`` for equicorrelated ``X``.

    Uses ``X_i = √ρ0 W + √(1-ρ0) ξ_i``, so the maximum is ``√ρ0 W +
    √(1-ρ0) max ξ``.  ``method="exact"`` draws ``max ξ`` by inverting its
    distribution function; ``method="direct"`` draws all ``n`` values.
    """
    if n < 1:
        raise DomainError("n must be positive")
    if n > cap:
        raise SizeCapExceeded(f"n={n} exceeds the cap {cap}")
    if not 0 <= rho0 < 1 or not 0 < gamma0 < 1:
        raise DomainError("need rho0 in [0, 1) and gamma0 in (0, 1)")
    if method not in ("exact", "direct"):
        raise DomainError(f"unknown method {method!r}")
    level = lopes_level(n, rho0, gamma0) if n > 1 else 0.0
    hits = 0
    for b, start in enumerate(range(0, replicates, BATCH)):
        m = min(BATCH, replicates - start)
        gen = substream(seed, b)
        w = gen.standard_normal(m)
        mx = math.sqrt(rho0) * w + math.sqrt(1.0 - rho0) * _iid_max(gen, n, m, method)
        hits += int(np.count_nonzero(mx <= level))
    p = hits / replicates
    return MaxTailEstimate(n, p, math.sqrt(p * (1 - p) / replicates), replicates)


def lower_tail_table(ns: Sequence[int], rho0: float, gamma0: float, replicates: int, seed: int) -> list[MaxTailEstimate]:
    """Estimates on a grid of ``n``, each from its own seed offset."""
    return [empirical_max_lower_tail(n, rho0, gamma0, replicates, seed + i) for i, n in enumerate(ns)]
