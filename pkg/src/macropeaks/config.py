"""Experiment configuration: TOML or JSON files validated into typed blocks.

Validation errors surface as :class:`ConfigError` carrying a dotted field
path such as ``gauge.gamma``.  :func:`canonical` gives the normalized JSON
form embedded in every experiment record.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import io
from .covariance import EquationSpec, Heat, Wave
from .errors import ConfigError, DomainError
from .peaks import StretchFactor, stretch_from_config
from .spectral import CorrelationModel, model_from_config

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

__all__ = [
    "ExperimentConfig",
    "CorrelationBlock",
    "EquationBlock",
    "LatticeBlock",
    "GaugeBlock",
    "EstimatorBlock",
    "ReplicationBlock",
    "OutputBlock",
    "Target",
    "load_config",
    "parse_config",
    "canonical",
]

_STRICT = ConfigDict(extra="forbid")


class CorrelationBlock(BaseModel):
    """Correlation model; parameters beyond ``kind`` and ``d`` go to the model."""

    model_config = ConfigDict(extra="allow")
    kind: str
    d: int = Field(1, ge=1, le=3)

    def build(self) -> CorrelationModel:
        try:
            return model_from_config(self.model_dump())
        except (DomainError, TypeError, KeyError) as exc:
            raise ConfigError("correlation", str(exc)) from exc


class EquationBlock(BaseModel):
    model_config = _STRICT
    kind: Literal["heat", "wave"]
    alpha: float = Field(2.0, gt=0, le=2)


class LatticeBlock(BaseModel):
    model_config = _STRICT
    generator: Literal["circulant", "cholesky"] = "circulant"
    n_min: int = Field(1, ge=1)
    n_max: int = Field(6, ge=1, le=14)
    spacing: float = Field(1.0, gt=0)
    theta: Optional[float] = Field(None, gt=0, lt=1)
    delta: Optional[float] = Field(None, gt=0, lt=1)
    mesh: int = Field(17, ge=1)
    anchor: float = 5.0

    @model_validator(mode="after")
    def _ordered(self):
        if self.n_min > self.n_max:
            raise ValueError("n_min must not exceed n_max")
        if self.theta is not None and self.delta is not None and self.delta >= self.theta:
            raise ValueError("delta must be smaller than theta")
        return self


class GaugeBlock(BaseModel):
    model_config = _STRICT
    gamma: list[float] = Field(default_factory=lambda: [0.5])
    stretch: Optional[dict[str, Any]] = None

    @field_validator("gamma", mode="before")
    @classmethod
    def _listify(cls, value):
        return value if isinstance(value, (list, tuple)) else [value]

    @field_validator("gamma")
    @classmethod
    def _positive(cls, value):
        if not value or any(not g > 0 for g in value):
            raise ValueError("every gamma must be positive")
        return value

    def build_stretch(self) -> Optional[StretchFactor]:
        if self.stretch is None:
            return None
        try:
            return stretch_from_config(self.stretch)
        except (DomainError, KeyError, TypeError) as exc:
            raise ConfigError("gauge.stretch", str(exc)) from exc


Method = Literal["counting", "bisection", "covering", "thickness"]


class EstimatorBlock(BaseModel):
    model_config = _STRICT
    methods: list[Method] = Field(default_factory=lambda: ["counting"])
    n_range: Optional[tuple[int, int]] = None
    n_max: int = Field(10, ge=4)
    tolerance: float = Field(0.02, gt=0)
    rho: list[float] = Field(default_factory=list)
    theta: list[float] = Field(default_factory=list)
    threshold: float = Field(0.1, gt=0)
    min_full_shells: int = Field(3, ge=1)

    @field_validator("rho", "theta")
    @classmethod
    def _unit(cls, value):
        if any(not 0 < v for v in value):
            raise ValueError("values must be positive")
        return value


class ReplicationBlock(BaseModel):
    model_config = _STRICT
    seed: int = Field(0, ge=0, lt=2**64)
    replicates: int = Field(1, ge=1)


class OutputBlock(BaseModel):
    model_config = _STRICT
    dir: Optional[str] = None


class Target(BaseModel):
    """A declared expectation on an aggregate.

    ``metric`` names an aggregate key.  With ``value``/``tol`` the
    aggregate mean must lie within ``tol`` of ``value``; with ``expect``
    the fraction of replicates reporting ``expect`` must reach
    ``min_fraction``; with ``max`` the aggregate must not exceed it.
    """

    model_config = _STRICT
    metric: str
    value: Optional[float] = None
    tol: Optional[float] = Field(None, ge=0)
    expect: Optional[str] = None
    min_fraction: float = Field(1.0, ge=0, le=1)
    max: Optional[float] = None

    @model_validator(mode="after")
    def _one_kind(self):
        kinds = [self.value is not None, self.expect is not None, self.max is not None]
        if sum(kinds) != 1:
            raise ValueError("set exactly one of value, expect or max")
        if self.value is not None and self.tol is None:
            raise ValueError("value targets need tol")
        return self


class ExperimentConfig(BaseModel):
    model_config = _STRICT
    name: str = "experiment"
    kind: Literal["spatial", "spacetime", "borell", "lopes"] = "spatial"
    correlation: Optional[CorrelationBlock] = None
    equation: Optional[EquationBlock] = None
    lattice: LatticeBlock = Field(default_factory=LatticeBlock)
    gauge: GaugeBlock = Field(default_factory=GaugeBlock)
    estimator: EstimatorBlock = Field(default_factory=EstimatorBlock)
    replication: ReplicationBlock = Field(default_factory=ReplicationBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)
    targets: list[Target] = Field(default_factory=list)
    lopes: Optional[dict[str, Union[float, list[int]]]] = None

    @model_validator(mode="after")
    def _blocks(self):
        if self.kind in ("spatial", "borell", "spacetime") and self.correlation is None:
            raise ValueError(f"{self.kind} experiments need a correlation block")
        if self.kind == "spacetime" and (self.equation is None or self.gauge.stretch is None):
            raise ValueError("spacetime experiments need an equation block and gauge.stretch")
        if self.kind == "lopes" and self.lopes is None:
            raise ValueError("lopes experiments need a lopes block")
        return self

    def equation_spec(self) -> Optional[EquationSpec]:
        if self.equation is None:
            return None
        eq = Heat(self.equation.alpha) if self.equation.kind == "heat" else Wave()
        try:
            return EquationSpec(eq, self.correlation.build())
        except DomainError as exc:
            raise ConfigError("equation", str(exc)) from exc

    def warnings(self) -> list[str]:
        """Consistency issues that are reported but not enforced."""
        out = []
        d = self.correlation.d if self.correlation else 1
        for theta in self.estimator.theta:
            for gamma in self.gauge.gamma:
                if theta <= gamma / d:
                    out.append(f"theta={theta} <= gamma/d={gamma / d:g}: thickness is not expected to hold")
        return out


def _error_path(exc: ValidationError) -> tuple[str, str]:
    err = exc.errors()[0]
    loc = [str(p) for p in err["loc"] if not isinstance(p, int)]
    return ".".join(loc) or "<root>", err["msg"]


def parse_config(data: dict[str, Any]) -> ExperimentConfig:
    """Validate a config mapping, raising :class:`ConfigError` with the field path."""
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        path, msg = _error_path(exc)
        raise ConfigError(path, msg) from None


def load_config(path) -> ExperimentConfig:
    """Read a ``.toml`` or ``.json`` config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError("<file>", f"cannot parse {path.name}: {exc}") from exc
    return parse_config(data)


def canonical(cfg: ExperimentConfig) -> str:
    """Canonical JSON form; parsing it back yields an equal config."""
    return io.dumps(cfg.model_dump(mode="json"))
