"""Correlation measures, their spectral densities, and integrability checks.

Fourier convention: ``f̂(ξ) = ∫ f(x) e^{-iξ·x} dx``, so the Dirac mass has
``f̂ ≡ 1``.  All built-in models are isotropic; ``spectral`` takes the
radius ``k = ‖ξ‖``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, ClassVar, Optional

import numpy as np
from scipy import integrate, interpolate

from . import quadrature
from .errors import DomainError, NoDensity, NotAFunction, QuadratureFailure
from .quadrature import DEFAULT_TOL, Term

__all__ = [
    "CorrelationModel",
    "WhiteNoise",
    "Riesz",
    "Exponential",
    "GaussianCorr",
    "LogDecay",
    "Tabulated",
    "ConditionReport",
    "correlation_at",
    "spectral_density_at",
    "check_dalang",
    "check_reinforced",
    "mixing_functional",
    "model_from_config",
]


@dataclass(frozen=True)
class CorrelationModel:
    """Base class; concrete kinds override the spectral hooks below."""

    d: int = 1

    kind: ClassVar[str] = "abstract"
    is_function: ClassVar[bool] = True
    #: decay exponent p of f̂(k) ~ k^{-p} at infinity (inf: faster than any power)
    spectral_tail: ClassVar[float] = math.inf
    support: ClassVar[float] = math.inf
    atoms: ClassVar[Optional[tuple]] = None

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.d}")

    @property
    def small_ball(self) -> tuple[str, float]:
        """Quadrature strategy for the origin: ``(name, exponent)``."""
        return ("plain", 0.0)

    def correlation(self, r: np.ndarray) -> np.ndarray:
        raise NotAFunction(f"{self.kind} correlation has no pointwise values")

    def spectral(self, k: np.ndarray) -> np.ndarray:
        raise NoDensity(f"{self.kind} spectral measure has no density")

    def params(self) -> dict[str, Any]:
        return {}

    def to_config(self) -> dict[str, Any]:
        return {"kind": self.kind, "d": self.d, **self.params()}

    @property
    def label(self) -> str:
        args = ",".join(f"{k}={v}" for k, v in self.params().items() if not isinstance(v, (list, tuple)))
        return f"{self.kind}({args},d={self.d})" if args else f"{self.kind}(d={self.d})"


@dataclass(frozen=True)
class WhiteNoise(CorrelationModel):
    """Dirac correlation ``f = δ``; spectral density identically one."""

    kind: ClassVar[str] = "white"
    is_function: ClassVar[bool] = False
    spectral_tail: ClassVar[float] = 0.0

    def spectral(self, k):
        return np.ones_like(np.asarray(k, dtype=float))


@dataclass(frozen=True)
class Riesz(CorrelationModel):
    """``f(x) = c‖x‖^{-β}`` with ``0 < β < d``."""

    beta: float = 0.5
    c: float = 1.0
    kind: ClassVar[str] = "riesz"

    def __post_init__(self):
        super().__post_init__()
        if not 0 < self.beta < self.d:
            raise DomainError(f"Riesz kernel needs 0 < beta < d, got beta={self.beta}, d={self.d}")
        if self.c <= 0:
            raise DomainError("Riesz constant c must be positive")

    @property
    def spectral_tail(self) -> float:
        return self.d - self.beta

    @property
    def small_ball(self):
        return ("alg", self.beta - 1.0)

    @property
    def fourier_constant(self) -> float:
        """``C`` such that the transform of ``‖x‖^{-β}`` is ``C‖ξ‖^{β-d}``."""
        d, b = self.d, self.beta
        return math.pi ** (d / 2) * 2 ** (d - b) * math.gamma((d - b) / 2) / math.gamma(b / 2)

    def correlation(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise DomainError("Riesz kernel is singular at r = 0")
        return self.c * r ** (-self.beta)

    def spectral(self, k):
        k = np.asarray(k, dtype=float)
        with np.errstate(divide="ignore"):
            return self.c * self.fourier_constant * k ** (self.beta - self.d)

    def params(self):
        return {"beta": self.beta, "c": self.c}


@dataclass(frozen=True)
class Exponential(CorrelationModel):
    """``f(x) = exp(-λ‖x‖)``."""

    lam: float = 1.0
    kind: ClassVar[str] = "exponential"

    def __post_init__(self):
        super().__post_init__()
        if self.lam <= 0:
            raise DomainError("exponential rate must be positive")

    @property
    def spectral_tail(self) -> float:
        return self.d + 1.0

    def correlation(self, r):
        return np.exp(-self.lam * np.asarray(r, dtype=float))

    def spectral(self, k):
        d, lam = self.d, self.lam
        const = 2**d * math.pi ** ((d - 1) / 2) * math.gamma((d + 1) / 2)
        return const * lam / (lam**2 + np.asarray(k, dtype=float) ** 2) ** ((d + 1) / 2)

    def params(self):
        return {"lambda": self.lam}


@dataclass(frozen=True)
class GaussianCorr(CorrelationModel):
    """``f(x) = exp(-‖x‖²/(2σ²))``."""

    sigma: float = 1.0
    kind: ClassVar[str] = "gaussian"

    def __post_init__(self):
        super().__post_init__()
        if self.sigma <= 0:
            raise DomainError("sigma must be positive")

    def correlation(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(-0.5 * (r / self.sigma) ** 2)

    def spectral(self, k):
        s = self.sigma
        return (2 * math.pi * s * s) ** (self.d / 2) * np.exp(-0.5 * (s * np.asarray(k, dtype=float)) ** 2)

    def params(self):
        return {"sigma": self.sigma}


@dataclass(frozen=True)
class LogDecay(CorrelationModel):
    """Logarithmically decaying kernel, ``f(r) ~ 1/(c log r)``.

    Built as a Gaussian scale mixture so it is positive definite in every
    dimension: with ``U`` distributed as ``P(U > u) = 1/(1 + c u)`` on
    ``u ≥ 0``, ``f(r) = E exp(-r² e^{-2U}/2)`` and
    ``f̂(k) = (2π)^{d/2} E[e^{dU} exp(-e^{2U} k²/2)]``.  The spectral
    density is infinite at the origin but integrable.
    """

    c: float = 1.0
    kind: ClassVar[str] = "logdecay"

    def __post_init__(self):
        super().__post_init__()
        if self.c <= 0:
            raise DomainError("log-decay constant c must be positive")

    @property
    def small_ball(self):
        return ("log", 0.0)

    def _weight(self, u):
        return self.c / (1.0 + self.c * u) ** 2

    def correlation(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty(r.shape)
        for idx, rr in np.ndenumerate(r):
            if rr == 0:
                out[idx] = 1.0
                continue
            fn = lambda u: math.exp(-0.5 * rr * rr * math.exp(-2 * u)) * self._weight(u)
            pivot = max(0.0, math.log(rr))
            v1 = integrate.quad(fn, 0.0, pivot, epsabs=1e-13, limit=200)[0] if pivot > 0 else 0.0
            v2 = integrate.quad(fn, pivot, np.inf, epsabs=1e-13, limit=200)[0]
            out[idx] = v1 + v2
        return out

    def spectral_kd_log(self, logk: float) -> float:
        """``f̂(k)·k^d`` as a function of ``log k``; stays finite as ``k → 0``."""
        d, c = self.d, self.c

        def fn(v):
            return math.exp(d * v - 0.5 * math.exp(2 * v)) * c / (1.0 + c * (v - logk)) ** 2

        lo = max(logk, -60.0)
        val = 0.0
        if lo < 0:
            val += integrate.quad(fn, lo, 0.0, epsrel=1e-12, epsabs=0, limit=200)[0]
        val += integrate.quad(fn, max(lo, 0.0), max(lo, 0.0) + 4.0, epsrel=1e-12, epsabs=0, limit=200)[0]
        return (2 * math.pi) ** (d / 2) * val

    def spectral_kd(self, k):
        k = np.asarray(k, dtype=float)
        out = np.zeros(k.shape)
        for idx, kk in np.ndenumerate(k):
            if kk > 0:
                out[idx] = self.spectral_kd_log(math.log(kk))
        return out

    def spectral(self, k):
        k = np.asarray(k, dtype=float)
        kd = self.spectral_kd(k)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(k > 0, kd / k**self.d, math.inf)

    def params(self):
        return {"c": self.c}


@dataclass(frozen=True)
class Tabulated(CorrelationModel):
    """User-supplied isotropic spectral measure on a radial grid.

    With ``measure=False`` (default) ``values`` are density samples
    interpolated monotone-cubically; beyond the last radius the density is
    zero unless ``tail_exponent`` is given, in which case it continues as a
    power law.  With ``measure=True`` ``values`` are masses placed uniformly
    on spheres of the given radii, and there is no density.
    """

    radii: tuple = ()
    values: tuple = ()
    tail_exponent: Optional[float] = None
    measure: bool = False
    kind: ClassVar[str] = "tabulated"
    is_function: ClassVar[bool] = False
    _interp: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        super().__post_init__()
        radii = np.asarray(self.radii, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if radii.ndim != 1 or radii.shape != vals.shape or radii.size < 1:
            raise DomainError("tabulated radii and values must be 1-D arrays of equal length")
        if np.any(vals < 0):
            raise DomainError("tabulated spectral values must be nonnegative")
        if np.any(np.diff(radii) <= 0) or radii[0] < 0:
            raise DomainError("tabulated radii must be nonnegative and strictly increasing")
        object.__setattr__(self, "radii", tuple(radii.tolist()))
        object.__setattr__(self, "values", tuple(vals.tolist()))
        if not self.measure:
            if radii.size < 2:
                raise DomainError("a tabulated density needs at least two samples")
            object.__setattr__(self, "_interp", interpolate.PchipInterpolator(radii, vals, extrapolate=False))

    @property
    def atoms(self):
        if not self.measure:
            return None
        return np.asarray(self.radii), np.asarray(self.values)

    @property
    def spectral_tail(self) -> float:
        return self.tail_exponent if self.tail_exponent is not None else math.inf

    @property
    def support(self) -> float:
        return math.inf if self.tail_exponent is not None else self.radii[-1]

    def spectral(self, k):
        if self.measure:
            raise NoDensity("tabulated spectral measure is atomic")
        k = np.asarray(k, dtype=float)
        out = np.nan_to_num(self._interp(np.clip(k, self.radii[0], None)), nan=0.0)
        kmax = self.radii[-1]
        beyond = k > kmax
        if np.any(beyond):
            if self.tail_exponent is None:
                out = np.where(beyond, 0.0, out)
            else:
                out = np.where(beyond, self.values[-1] * (np.maximum(k, kmax) / kmax) ** (-self.tail_exponent), out)
        return np.maximum(out, 0.0)

    def params(self):
        p = {"radii": list(self.radii), "values": list(self.values), "measure": self.measure}
        if self.tail_exponent is not None:
            p["tail_exponent"] = self.tail_exponent
        return p


_KINDS = {cls.kind: cls for cls in (WhiteNoise, Riesz, Exponential, GaussianCorr, LogDecay, Tabulated)}
_ALIASES = {"lambda": "lam"}


def model_from_config(cfg: dict[str, Any]) -> CorrelationModel:
    """Build a model from a ``correlation`` config block (inverse of ``to_config``)."""
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    if kind not in _KINDS:
        raise DomainError(f"unknown correlation kind {kind!r}; expected one of {sorted(_KINDS)}")
    kwargs = {_ALIASES.get(k, k): v for k, v in cfg.items() if v is not None}
    if kind == "tabulated":
        kwargs["radii"] = tuple(kwargs.get("radii", ()))
        kwargs["values"] = tuple(kwargs.get("values", ()))
    return _KINDS[kind](**kwargs)


# ---------------------------------------------------------------------------
# operations


def correlation_at(model: CorrelationModel, r):
    """Evaluate the correlation function ``f`` at radius ``r``."""
    if not model.is_function:
        raise NotAFunction(f"{model.kind} correlation is a measure, not a function")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise DomainError("radius must be nonnegative")
    out = model.correlation(r_arr)
    return float(out) if np.ndim(out) == 0 else out


def spectral_density_at(model: CorrelationModel, xi) -> float:
    """Spectral density at the frequency vector ``xi`` (or its norm)."""
    k = float(np.linalg.norm(np.atleast_1d(np.asarray(xi, dtype=float))))
    return float(model.spectral(np.array([k]))[0])


@dataclass(frozen=True)
class ConditionReport:
    condition: str
    satisfied: bool
    value: float
    error: float
    witness: str = ""
    eta: Optional[float] = None
    alpha: Optional[float] = None

    def as_dict(self) -> dict[str, Any]:
        return {
            "condition": self.condition,
            "eta": self.eta,
            "alpha": self.alpha,
            "satisfied": self.satisfied,
            "value": self.value,
            "error": self.error,
            "witness": self.witness,
        }


def _check_alpha(alpha: float):
    if not 0 < alpha <= 2:
        raise DomainError(f"alpha must lie in (0, 2], got {alpha}")


def _power_multiplier(alpha: float, eta: float):
    h = lambda k: (1.0 + np.asarray(k, dtype=float) ** alpha) ** (-eta)
    return h, [Term(h, alpha * eta)]


def _integrability(model: CorrelationModel, alpha: float, eta: float, name: str, tol: float) -> ConditionReport:
    _check_alpha(alpha)
    # radial integrand f̂(k) k^{d-1} (1+k^α)^{-η} decays like k^{-(p + αη - d + 1)}
    exponent = model.spectral_tail + alpha * eta
    finite = model.atoms is not None or math.isfinite(model.support) or exponent > model.d
    if not finite:
        witness = f"radial integrand ~ k^{-(exponent - model.d + 1):g} at infinity (needs exponent > 1)"
        return ConditionReport(name, False, math.inf, math.inf, witness, eta if name != "Dalang" else None, alpha)
    h, terms = _power_multiplier(alpha, eta)
    value, err = quadrature.radial_integral(model, h, terms, 0.0, tol)
    if err > max(100 * tol, 1e-6 * abs(value)):
        raise QuadratureFailure(f"{name} integral error estimate {err:.3g} exceeds tolerance")
    witness = f"tail exponent {exponent:g} > d = {model.d}"
    return ConditionReport(name, True, value, err, witness, eta if name != "Dalang" else None, alpha)


def check_dalang(model: CorrelationModel, alpha: float, tol: float = DEFAULT_TOL) -> ConditionReport:
    """Existence condition ``∫ f̂(dξ)/(1+‖ξ‖^α) < ∞``."""
    return _integrability(model, alpha, 1.0, "Dalang", tol)


def check_reinforced(model: CorrelationModel, alpha: float, eta: float, tol: float = DEFAULT_TOL) -> ConditionReport:
    """Continuity condition ``∫ f̂(dξ)/(1+‖ξ‖^α)^η < ∞`` for ``η ∈ [0, 1)``."""
    if not 0 <= eta < 1:
        raise DomainError(f"eta must lie in [0, 1), got {eta}")
    return _integrability(model, alpha, eta, "Reinforced", tol)


def mixing_functional(model: CorrelationModel, alpha: float, z, tol: float = DEFAULT_TOL) -> float:
    """``∫ e^{iξ·z} f̂(dξ)/(1+‖ξ‖^α)``; real because f̂ is symmetric."""
    report = check_dalang(model, alpha, tol)
    if not report.satisfied:
        raise DomainError(f"mixing functional needs the Dalang condition: {report.witness}")
    znorm = float(np.linalg.norm(np.atleast_1d(np.asarray(z, dtype=float))))
    h, terms = _power_multiplier(alpha, 1.0)
    value, err = quadrature.radial_integral(model, h, terms, znorm, tol)
    if err > max(1e3 * tol, 1e-6 * abs(value)):
        raise QuadratureFailure(f"mixing functional at |z|={znorm:g}: error estimate {err:.3g}")
    return value
