"""Samplers for stationary, unit-variance Gaussian fields.

Two generators are provided: exact Cholesky factorization on arbitrary
point sets, and circulant embedding on regular 1-D lattices.  Randomness
comes from :func:`macropeaks.rng.substream`, so a sample is a pure
function of its inputs, its seed and its replicate index.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence, Union

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from . import io
from .covariance import CorrelationTable
from .errors import DomainError, EmbeddingNotPSD, FactorizationFailure, MismatchedPoints, SizeCapExceeded
from .rng import substream
from .spectral import CorrelationModel

__all__ = [
    "FieldSample",
    "as_correlation",
    "correlation_matrix",
    "CholeskySampler",
    "CirculantSampler",
    "sample_cholesky",
    "sample_cholesky_batch",
    "sample_circulant_1d",
    "empirical_cov_check",
    "CovCheck",
    "DEFAULT_CAP",
    "JITTER",
]

DEFAULT_CAP = 8000
JITTER = 1e-10
CLIP_FRACTION = 1e-6

Correlation = Union[CorrelationModel, CorrelationTable, Callable[[np.ndarray], np.ndarray]]


@dataclass
class FieldSample:
    points: np.ndarray
    values: np.ndarray
    generator: str
    seed: int
    correlation_id: str
    replicate: int = 0
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.points.shape[0],):
            raise MismatchedPoints(f"{self.values.shape[0]} values for {self.points.shape[0]} points")

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def metadata(self) -> dict[str, Any]:
        return {
            "generator": self.generator,
            "seed": self.seed,
            "replicate": self.replicate,
            "correlation": self.correlation_id,
            "n_points": int(self.points.shape[0]),
            "warnings": list(self.warnings),
        }

    def to_csv(self, path) -> Path:
        """Write ``x1..xd,value`` rows and a JSON sidecar with the metadata."""
        path = Path(path)
        header = [f"x{i + 1}" for i in range(self.d)] + ["value"]
        rows = np.column_stack([self.points, self.values]).tolist()
        io.write_csv(path, header, rows)
        io.write_json(path.with_suffix(".json"), self.metadata())
        return path

    @classmethod
    def from_csv(cls, path) -> "FieldSample":
        import json

        path = Path(path)
        _, arr = io.read_csv_array(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        return cls(
            arr[:, :-1], arr[:, -1], meta["generator"], meta["seed"], meta["correlation"], meta["replicate"], meta["warnings"]
        )


def as_correlation(corr: Correlation) -> tuple[Callable[[np.ndarray], np.ndarray], str]:
    """Normalize the accepted correlation inputs to ``(callable, id)``.

    Models are rescaled so that ``ρ(0) = 1``.
    """
    if isinstance(corr, CorrelationModel):
        model = corr
        f0 = float(model.correlation(np.array([0.0]))[0])
        if not math.isfinite(f0) or f0 <= 0:
            raise DomainError(f"{model.label} has no finite positive value at the origin")
        return (lambda r: model.correlation(np.asarray(r, dtype=float)) / f0), model.label
    if isinstance(corr, CorrelationTable):
        return corr, corr.label or "table"
    if callable(corr):
        return corr, getattr(corr, "__name__", "callable")
    raise DomainError(f"cannot use {type(corr).__name__} as a correlation")


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise DomainError("points must be an (n, d) array")
    return pts


def correlation_matrix(corr: Correlation, points) -> np.ndarray:
    """``Σ_ij = ρ(‖p_i - p_j‖)`` with the diagonal set to exactly one."""
    fn, _ = as_correlation(corr)
    pts = _as_points(points)
    dist = cdist(pts, pts)
    sigma = np.asarray(fn(dist.ravel()), dtype=float).reshape(dist.shape)
    np.fill_diagonal(sigma, 1.0)
    return sigma


def _check_cap(n: int, cap: int):
    if n > cap:
        raise SizeCapExceeded(f"{n} points exceed the Cholesky cap of {cap}")


def _factorize(sigma: np.ndarray, jitter: float) -> np.ndarray:
    sigma[np.diag_indices_from(sigma)] += jitter
    try:
        return linalg.cholesky(sigma, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise FactorizationFailure(f"covariance matrix is not positive definite: {exc}") from exc


class CholeskySampler:
    """Factorizes ``Σ + jitter·I`` once and draws any number of replicates."""

    def __init__(self, corr: Correlation, points, cap: int = DEFAULT_CAP, jitter: float = JITTER):
        self.points = _as_points(points)
        _check_cap(self.points.shape[0], cap)
        _, self.correlation_id = as_correlation(corr)
        self.factor = _factorize(correlation_matrix(corr, self.points), jitter)

    @classmethod
    def from_covariance(
        cls, sigma, points, label: str, cap: int = DEFAULT_CAP, jitter: float = JITTER
    ) -> "CholeskySampler":
        """Sampler for an explicit covariance matrix, e.g. a non-stationary space-time one.

        The jitter is scaled by the mean diagonal entry.
        """
        sampler = cls.__new__(cls)
        sampler.points = _as_points(points)
        sigma = np.array(sigma, dtype=float)
        if sigma.shape != (sampler.points.shape[0],) * 2:
            raise MismatchedPoints("covariance matrix does not match the point set")
        _check_cap(sampler.points.shape[0], cap)
        sampler.correlation_id = label
        sampler.factor = _factorize(sigma, jitter * float(np.mean(np.diag(sigma))))
        return sampler

    def draw(self, seed: int, replicate: int = 0) -> FieldSample:
        noise = substream(seed, replicate).standard_normal(self.points.shape[0])
        values = self.factor @ noise
        return FieldSample(self.points, values, "cholesky", seed, self.correlation_id, replicate)


def sample_cholesky(corr: Correlation, points, seed: int, replicate: int = 0, cap: int = DEFAULT_CAP) -> FieldSample:
    """Exact draw of the field at ``points``."""
    return CholeskySampler(corr, points, cap).draw(seed, replicate)


def sample_cholesky_batch(corr: Correlation, points, seed: int, replicates: int, cap: int = DEFAULT_CAP) -> list[FieldSample]:
    sampler = CholeskySampler(corr, points, cap)
    return [sampler.draw(seed, r) for r in range(replicates)]


class CirculantSampler:
    """Circulant embedding of the Toeplitz correlation of a 1-D lattice.

    Parameters
    ----------
    fallback : {"clip", "pad"}
        ``"clip"`` zeroes negative eigenvalues when their mass is below
        ``1e-6`` of the total.  ``"pad"`` first doubles the embedding up to
        four times, then clips under the same rule.
    """

    def __init__(self, corr: Correlation, n_points: int, spacing: float = 1.0, origin: float = 0.0, fallback: str = "clip"):
        if n_points < 1:
            raise DomainError("n_points must be positive")
        if spacing <= 0:
            raise DomainError("spacing must be positive")
        if fallback not in ("clip", "pad"):
            raise DomainError(f"unknown circulant fallback {fallback!r}")
        self.fn, self.correlation_id = as_correlation(corr)
        self.n = int(n_points)
        self.spacing = float(spacing)
        self.origin = float(origin)
        self.warnings: list[str] = []
        self.sqrt_eig = None
        if self.n > 1:
            self._embed(fallback)

    def _embed(self, fallback: str):
        attempts = 5 if fallback == "pad" else 1
        base = self.n
        for attempt in range(attempts):
            length = base * 2**attempt
            try:
                row = np.asarray(self.fn(np.arange(length) * self.spacing), dtype=float)
            except DomainError:
                if attempt == 0:
                    raise
                break
            row[0] = 1.0
            circ = np.concatenate([row, row[-2:0:-1]])
            eig = np.fft.fft(circ).real
            neg = -eig[eig < 0].sum()
            if neg == 0:
                self._set(eig)
                return
        total = np.abs(eig).sum()
        if neg > CLIP_FRACTION * total:
            raise EmbeddingNotPSD(f"negative embedding mass {neg / total:.3g} of total exceeds {CLIP_FRACTION:g}")
        msg = f"clipped negative circulant eigenvalues (mass fraction {neg / total:.3g})"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        self.warnings.append(msg)
        self._set(np.maximum(eig, 0.0))

    def _set(self, eig: np.ndarray):
        self.m = eig.size
        self.sqrt_eig = np.sqrt(np.maximum(eig, 0.0) / self.m)

    @property
    def points(self) -> np.ndarray:
        return (self.origin + self.spacing * np.arange(self.n))[:, None]

    def values(self, seed: int, replicate: int = 0) -> np.ndarray:
        gen = substream(seed, replicate)
        if self.n == 1:
            return gen.standard_normal(1)
        noise = gen.standard_normal((2, self.m))
        spec = self.sqrt_eig * (noise[0] + 1j * noise[1])
        return np.fft.fft(spec).real[: self.n]

    def draw(self, seed: int, replicate: int = 0) -> FieldSample:
        return FieldSample(
            self.points, self.values(seed, replicate), "circulant1d", seed, self.correlation_id, replicate, list(self.warnings)
        )


def sample_circulant_1d(
    corr: Correlation, n_points: int, spacing: float, origin: float, seed: int, replicate: int = 0, fallback: str = "clip"
) -> FieldSample:
    """Draw the field on ``origin + k·spacing``, ``k = 0..n_points-1``."""
    return CirculantSampler(corr, n_points, spacing, origin, fallback).draw(seed, replicate)


@dataclass(frozen=True)
class CovCheck:
    max_deviation: float
    table: list  # rows (i, j, lag, empirical, target, stderr)
    degenerate: bool
    n_samples: int

    header = ("i", "j", "lag", "empirical", "target", "stderr")


def empirical_cov_check(samples: Sequence[FieldSample], corr: Correlation) -> CovCheck:
    """Compare the replicate covariance (known zero mean) to the target."""
    if len(samples) < 2:
        raise MismatchedPoints("need at least two samples")
    pts = samples[0].points
    for s in samples[1:]:
        if s.points.shape != pts.shape or not np.array_equal(s.points, pts):
            raise MismatchedPoints("samples are not on a common point set")
    target = correlation_matrix(corr, pts)
    vals = np.stack([s.values for s in samples])
    n, p = vals.shape
    rows, worst = [], 0.0
    iu = np.triu_indices(p)
    for i, j in zip(*iu):
        prod = vals[:, i] * vals[:, j]
        est = math.fsum(prod) / n
        spread = math.fsum((prod - est) ** 2) / max(n - 1, 1)
        stderr = math.sqrt(spread / n)
        lag = float(np.linalg.norm(pts[i] - pts[j]))
        rows.append((int(i), int(j), lag, est, float(target[i, j]), stderr))
        worst = max(worst, abs(est - target[i, j]))
    degenerate = bool(np.any(np.all(vals == 0, axis=0)))
    return CovCheck(worst, rows, degenerate, n)
