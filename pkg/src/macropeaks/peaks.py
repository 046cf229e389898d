"""Tall-peak exceedance sets and stretch factors.

A point ``x`` with ``‖x‖ > e`` is a tall peak at scale ``γ`` when the field
value reaches ``√(2γ v log‖x‖)``.  In space-time, a sample at ``(t, x)`` is
kept when its value reaches ``√(2γ v(t) g(t))`` and is reported at the
stretched coordinate ``(e^{g(t)}, x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np
from scipy import interpolate

from . import io
from .errors import DomainError, InvalidVariance, PreconditionFail
from .fieldgen import FieldSample

__all__ = [
    "GaugeParams",
    "StretchFactor",
    "PowerLaw",
    "ExpStretch",
    "TabulatedStretch",
    "stretch_from_config",
    "ExceedanceSet",
    "StretchReport",
    "gauge_threshold",
    "extract_spatial_peaks",
    "extract_spacetime_peaks",
    "validate_stretch",
]

MIN_RADIUS = math.e


@dataclass(frozen=True)
class GaugeParams:
    gamma: float
    variance: float = 1.0
    min_radius: float = MIN_RADIUS

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if not self.variance > 0:
            raise InvalidVariance(f"variance must be positive, got {self.variance}")


def gauge_threshold(norms, gamma: float, variance: float = 1.0) -> np.ndarray:
    """``√(2 γ v log‖x‖)`` for the given norms."""
    norms = np.asarray(norms, dtype=float)
    return np.sqrt(2.0 * gamma * variance * np.log(norms))


# ---------------------------------------------------------------------------
# stretch factors


class StretchFactor:
    """Continuous increasing ``g`` on ``(1, ∞)`` with ``g(r) → ∞``."""

    name = "abstract"

    def forward(self, r):
        raise NotImplementedError

    def inverse(self, y):
        """``g^{-1}(y)``; ``nan`` where undefined."""
        raise NotImplementedError

    def to_config(self) -> dict[str, Any]:
        return {"kind": self.name}

    def __call__(self, r):
        return self.forward(r)


@dataclass(frozen=True)
class PowerLaw(StretchFactor):
    delta: float = 0.5
    name = "powerlaw"

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError("power-law exponent must be positive")

    def forward(self, r):
        return np.asarray(r, dtype=float) ** self.delta

    def inverse(self, y):
        return np.asarray(y, dtype=float) ** (1.0 / self.delta)

    def to_config(self):
        return {"kind": self.name, "delta": self.delta}


@dataclass(frozen=True)
class ExpStretch(StretchFactor):
    name = "exp"

    def forward(self, r):
        return np.exp(np.asarray(r, dtype=float))

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(y > 0, np.log(np.where(y > 0, y, 1.0)), np.nan)


@dataclass(frozen=True)
class TabulatedStretch(StretchFactor):
    """Monotone-cubic interpolation of user samples ``(r_i, g_i)``.

    Outside the sampled radii (or where the samples are flat) the inverse is
    undefined and returns ``nan``.
    """

    radii: tuple = ()
    values: tuple = ()
    name = "tabulated"

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        g = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != g.shape or r.size < 2 or np.any(np.diff(r) <= 0):
            raise DomainError("tabulated stretch needs increasing radii and matching values")
        object.__setattr__(self, "radii", tuple(r.tolist()))
        object.__setattr__(self, "values", tuple(g.tolist()))
        object.__setattr__(self, "_fwd", interpolate.PchipInterpolator(r, g, extrapolate=False))

    @property
    def strictly_increasing(self) -> bool:
        return bool(np.all(np.diff(self.values) > 0))

    def forward(self, r):
        return self._fwd(np.asarray(r, dtype=float))

    def inverse(self, y):
        """Root of ``forward(r) = y`` on the strictly increasing prefix of the samples."""
        y = np.asarray(y, dtype=float)
        g = np.asarray(self.values)
        stop = g.size if self.strictly_increasing else int(np.argmax(np.diff(g) <= 0)) + 1
        out = np.full(y.shape, np.nan)
        if stop < 2:
            return out
        top = self.radii[stop - 1]
        flat = out.reshape(-1)
        for i, target in enumerate(y.reshape(-1)):
            if g[0] <= target <= g[stop - 1]:
                roots = self._fwd.solve(float(target), extrapolate=False)
                roots = roots[roots <= top]
                flat[i] = roots[0] if roots.size else np.nan
        return out

    def to_config(self):
        return {"kind": self.name, "radii": list(self.radii), "values": list(self.values)}


def stretch_from_config(cfg: dict[str, Any]) -> StretchFactor:
    kind = cfg.get("kind")
    if kind == "powerlaw":
        return PowerLaw(float(cfg.get("delta", 0.5)))
    if kind == "exp":
        return ExpStretch()
    if kind == "tabulated":
        return TabulatedStretch(tuple(cfg["radii"]), tuple(cfg["values"]))
    raise DomainError(f"unknown stretch kind {kind!r}")


# ---------------------------------------------------------------------------
# exceedance sets


@dataclass
class ExceedanceSet:
    points: np.ndarray
    values: np.ndarray
    thresholds: np.ndarray
    provenance: dict = field(default_factory=dict)
    sources: list = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def to_csv(self, path) -> Path:
        path = Path(path)
        k = self.points.shape[1]
        header = [f"x{i + 1}" for i in range(k)] + ["value", "threshold"]
        rows = np.column_stack([self.points, self.values, self.thresholds]).tolist()
        io.write_csv(path, header, rows)
        io.write_json(path.with_suffix(".json"), {"provenance": self.provenance, "sources": self.sources})
        return path


def extract_spatial_peaks(fld: FieldSample, gauge: GaugeParams) -> ExceedanceSet:
    """Points with ``‖x‖ > e`` whose value is at least the gauge (closed inequality)."""
    norms = np.linalg.norm(fld.points, axis=1)
    outside = norms > gauge.min_radius
    thr = np.full(norms.shape, np.inf)
    thr[outside] = gauge_threshold(norms[outside], gauge.gamma, gauge.variance)
    keep = outside & (fld.values >= thr)
    prov = {"gamma": gauge.gamma, "variance": gauge.variance, "min_radius": gauge.min_radius, "kind": "spatial"}
    return ExceedanceSet(fld.points[keep], fld.values[keep], thr[keep], prov, [fld.metadata()])


VarianceSpec = Union[float, Callable[[np.ndarray], np.ndarray]]


def extract_spacetime_peaks(
    fld: FieldSample, gamma: float, variance: VarianceSpec, g: StretchFactor
) -> ExceedanceSet:
    """Space-time peaks reported at ``(e^{g(t)}, x)``.

    The first coordinate of each sample point is the physical time ``t``.
    Samples with ``g(t) ≤ 1`` lie outside ``(e, ∞) × R^d`` and are dropped.
    """
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    t = fld.points[:, 0]
    v = np.broadcast_to(np.asarray(variance(t) if callable(variance) else variance, dtype=float), t.shape)
    if np.any(~(v > 0)):
        raise InvalidVariance("variance function must be positive at every sample time")
    gt = np.asarray(g.forward(t), dtype=float)
    inside = np.isfinite(gt) & (gt > 1.0)
    thr = np.full(t.shape, np.inf)
    thr[inside] = np.sqrt(2.0 * gamma * v[inside] * gt[inside])
    keep = inside & (fld.values >= thr)
    pts = np.column_stack([np.exp(gt[keep]), fld.points[keep, 1:]])
    prov = {"gamma": gamma, "stretch": g.to_config(), "kind": "spacetime"}
    return ExceedanceSet(pts, fld.values[keep], thr[keep], prov, [fld.metadata()])


@dataclass(frozen=True)
class StretchReport:
    passed: bool
    ns: tuple
    sequences: dict
    failures: tuple
    threshold: float

    def as_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "ns": list(self.ns),
            "sequences": {str(k): list(v) for k, v in self.sequences.items()},
            "failures": list(self.failures),
            "threshold": self.threshold,
        }


def validate_stretch(
    corr: Callable[[float, float], float],
    g: StretchFactor,
    epsilons: Sequence[float],
    ns: Sequence[float],
    threshold: float = 0.05,
    log_radius: bool = False,
) -> StretchReport:
    """Check that ``𝓚(g^{-1}(n), e^{nε})`` vanishes along the grid ``ns``.

    Each sequence must end below ``threshold`` and be non-increasing over
    the final half of the grid.  With ``log_radius=True`` the callable
    receives ``nε`` instead of ``e^{nε}``, which avoids overflow on long
    grids.

    Raises
    ------
    PreconditionFail
        If ``g^{-1}`` is undefined or not strictly increasing on the grid.
    """
    ns = np.asarray(ns, dtype=float)
    if ns.size < 2 or np.any(np.diff(ns) <= 0):
        raise DomainError("n grid must be increasing with at least two points")
    times = np.asarray(g.inverse(ns), dtype=float)
    if np.any(~np.isfinite(times)):
        raise PreconditionFail("stretch factor does not reach every level of the grid (g bounded or not invertible)")
    if np.any(np.diff(times) <= 0):
        raise PreconditionFail("stretch factor is not strictly increasing on the grid")
    back = np.asarray(g.forward(times), dtype=float)
    if not np.allclose(back, ns, rtol=1e-6, atol=1e-9):
        raise PreconditionFail("stretch inverse is inconsistent with the forward map")
    half = ns.size // 2
    sequences, failures = {}, []
    for eps in epsilons:
        radius = (lambda n: n * eps) if log_radius else (lambda n: math.exp(n * eps))
        seq = np.array([corr(float(t), radius(n)) for t, n in zip(times, ns)])
        sequences[float(eps)] = tuple(seq.tolist())
        tail = seq[half:]
        if not np.all(np.isfinite(seq)):
            failures.append(f"eps={eps}: non-finite correlation")
        elif abs(seq[-1]) >= threshold:
            failures.append(f"eps={eps}: terminal value {seq[-1]:.4g} not below {threshold}")
        elif np.any(np.diff(tail) > 1e-12):
            failures.append(f"eps={eps}: not non-increasing over the final half")
    return StretchReport(not failures, tuple(ns.tolist()), sequences, tuple(failures), threshold)
