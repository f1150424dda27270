"""Experiment configuration schema.

A config is a JSON object; unknown keys are rejected and every field is
validated before any computation starts. Distribution entries use the
``{"family": name, "params": {...}}`` form of
:func:`raretail.distributions.from_spec`.
"""

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .distributions import from_spec
from .exceptions import ConfigError, RareTailError

__all__ = ["DistSpec", "Budgets", "RegimeSpec", "ExperimentConfig", "load_config", "KINDS"]

KINDS = (
    "truncation_study",
    "empirical_study",
    "bootstrap_coverage",
    "gpd_bootstrap_coverage",
    "evt_detection",
    "thresholds",
)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DistSpec(_Strict):
    family: str
    params: dict = Field(default_factory=dict)
    label: Optional[str] = None

    @model_validator(mode="after")
    def _buildable(self):
        try:
            from_spec({"family": self.family, "params": self.params})
        except (RareTailError, KeyError, TypeError) as exc:
            raise ValueError(f"invalid distribution {self.family}: {exc}") from None
        return self

    def build(self):
        return from_spec({"family": self.family, "params": self.params})

    @property
    def name(self):
        if self.label:
            return self.label
        if not self.params:
            return self.family
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.family}({inner})"


class Budgets(_Strict):
    """Monte Carlo budgets; all are recorded in every report."""

    estimator_reps: int = Field(10**6, ge=1)
    oracle_reps: int = Field(10**6, ge=1)
    inner_reps: int = Field(10**5, ge=1)
    bootstrap_B: int = Field(100, ge=2)


class RegimeSpec(_Strict):
    regime: Literal["heavy", "exponential", "normal"]
    alpha: Optional[float] = None
    beta: float = 1.5
    lam: Optional[float] = None
    sigma2: Optional[float] = None
    c: float = 1.0
    mu: float = 0.0

    @model_validator(mode="after")
    def _params(self):
        try:
            self.build()
        except (RareTailError, TypeError) as exc:
            raise ValueError(str(exc)) from None
        return self

    def build(self):
        from .asymptotics import ExponentialLike, HeavyPowerLaw, NormalLike

        if self.regime == "heavy":
            return HeavyPowerLaw(self.alpha, self.beta)
        if self.regime == "exponential":
            return ExponentialLike(self.lam)
        return NormalLike(self.sigma2, self.c)


class ExperimentConfig(_Strict):
    kind: Literal[KINDS]
    distributions: list[DistSpec] = Field(default_factory=list)
    n: list[int] = Field(default_factory=lambda: [10])
    target_p: Optional[list[float]] = None
    b: Optional[list[float]] = None
    gamma: Optional[list[float]] = None
    data_sizes: list[int] = Field(default_factory=list)
    replications: int = Field(20, ge=1)
    budgets: Budgets = Field(default_factory=Budgets)
    seed: int = 0
    output_dir: Optional[str] = None
    estimator: Literal["auto", "crude", "cond_mc_ak", "is_tilted"] = "auto"
    # truncation study
    truncation_quantile: float = Field(0.001, ge=0.0, lt=1.0)
    # bootstrap
    level: float = Field(0.95, gt=0.0, lt=1.0)
    tail_quantiles: list[float] = Field(default_factory=lambda: [0.05, 0.01, 0.005])
    fit_methods: list[Literal["mle", "mom", "pwm"]] = Field(default_factory=lambda: ["mle"])
    true_p: Optional[float] = None
    # evt
    estimators: list[Literal["pickands", "moment"]] = Field(default_factory=lambda: ["pickands", "moment"])
    k_window: Optional[tuple[int, int]] = None
    margin: float = 0.05
    # thresholds
    regimes: list[RegimeSpec] = Field(default_factory=list)
    emit_plots: bool = True

    @field_validator("n", "data_sizes")
    @classmethod
    def _positive_ints(cls, v):
        if any(x < 1 for x in v):
            raise ValueError("sizes must be positive integers")
        return v

    @field_validator("target_p")
    @classmethod
    def _probabilities(cls, v):
        if v is not None and any(not 0 < p < 1 for p in v):
            raise ValueError("target_p values must lie in (0, 1)")
        return v

    @field_validator("tail_quantiles")
    @classmethod
    def _tail_q(cls, v):
        if any(not 0 < q < 0.5 for q in v):
            raise ValueError("tail quantiles must lie in (0, 0.5)")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        targets = [t for t in (self.target_p, self.b, self.gamma) if t is not None]
        if self.kind in ("truncation_study", "empirical_study", "bootstrap_coverage", "gpd_bootstrap_coverage"):
            if len(targets) != 1:
                raise ValueError("give exactly one of target_p, b, gamma")
            if not self.distributions:
                raise ValueError("at least one distribution is required")
        if self.kind in ("empirical_study", "bootstrap_coverage", "gpd_bootstrap_coverage", "evt_detection"):
            if not self.data_sizes:
                raise ValueError("data_sizes is required for this experiment kind")
        if self.kind == "evt_detection" and not self.distributions:
            raise ValueError("at least one distribution is required")
        if self.kind == "thresholds":
            if not self.regimes:
                raise ValueError("thresholds needs at least one regime")
            if self.b is None and self.target_p is None:
                raise ValueError("thresholds needs b or target_p")
        return self

    def targets(self):
        """(kind, values) of the configured rarity target."""
        for name in ("target_p", "b", "gamma"):
            v = getattr(self, name)
            if v is not None:
                return name, v
        return None, []

    def to_dict(self):
        return self.model_dump(mode="json")


def load_config(source, **overrides):
    """Parse a config from a path, JSON text or dict; ``overrides`` replace top-level keys."""
    try:
        if isinstance(source, dict):
            data = dict(source)
        else:
            text = str(source)
            if text.lstrip().startswith("{"):
                data = json.loads(text)
            else:
                data = json.loads(Path(text).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
