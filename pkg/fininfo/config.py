"""Configuration models.

All models are frozen pydantic models validated on construction. A pydantic
validation failure is re-raised as ``ConfigError`` so callers see one error
family regardless of which layer rejected the value.

Environment variables (``AnalysisConfig.from_env``):
  FININFO_WINDOW, FININFO_KNN_K, FININFO_JITTER_SIGMA, FININFO_BINS,
  FININFO_SMOOTHING, FININFO_LAG, FININFO_THETA_NMI, FININFO_THETA_KL,
  FININFO_BETA, FININFO_STRIDE, FININFO_SEED, FININFO_METRIC, FININFO_WORKERS
"""

from __future__ import annotations

import os
from collections.abc import Mapping
from typing import Any, Literal, Self

import pydantic
from pydantic import BaseModel, ConfigDict, Field, model_validator

from fininfo.errors import ConfigError

ENV_PREFIX = "FININFO_"

Metric = Literal["chebyshev", "euclidean"]


class FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    def __init__(self, **data: Any) -> None:
        try:
            super().__init__(**data)
        except pydantic.ValidationError as exc:
            raise ConfigError(f"invalid {type(self).__name__}: {exc}") from None


class KnnConfig(FrozenModel):
    """Nearest-neighbor estimator hyperparameters.

    ``k`` must also satisfy k <= N - 1 for every sample it is applied to; that
    part is checked by the estimators since N is not known here.
    """

    k: int = Field(default=3, ge=1)
    jitter_sigma: float = Field(default=1e-10, ge=0.0, allow_inf_nan=False)
    seed: int = 0
    metric: Metric = "chebyshev"
    # Threads for the neighbor query (scipy cKDTree ``workers``; -1 = all cores).
    workers: int = Field(default=1, ge=-1)

    @model_validator(mode="after")
    def _workers_nonzero(self) -> Self:
        if self.workers == 0:
            raise ValueError("workers must be >= 1 or -1")
        return self


class RollingSpec(FrozenModel):
    """Window geometry for the rolling estimators."""

    window: int = Field(default=252, ge=30)
    stride: int = Field(default=1, ge=1)
    lag: int = Field(default=1, ge=0)
    past_len_target: int = Field(default=1, ge=1)
    past_len_source: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _window_exceeds_lag(self) -> Self:
        if self.window <= self.lag + 1:
            raise ValueError(f"window ({self.window}) must exceed lag + 1 ({self.lag + 1})")
        return self

    def non_overlapping(self) -> RollingSpec:
        """Preset where consecutive evaluations share no observations (stride = window)."""
        return self.model_copy(update={"stride": self.window})


class AnalysisConfig(FrozenModel):
    """Parameters shared by every CLI subcommand.

    Defaults: one trading year windows, 3 neighbors, 1e-10 jitter, 50 KL bins
    with 1e-10 smoothing, lag 1, regime threshold 2, NMI threshold 0.05 and VaR
    sensitivity 1.
    """

    window: int = Field(default=252, ge=30)
    knn_k: int = Field(default=3, ge=1)
    jitter_sigma: float = Field(default=1e-10, ge=0.0, allow_inf_nan=False)
    bins: int = Field(default=50, ge=2)
    smoothing: float = Field(default=1e-10, ge=0.0, allow_inf_nan=False)
    lag: int = Field(default=1, ge=0)
    theta_nmi: float = Field(default=0.05, gt=0.0, lt=1.0)
    theta_kl: float = 2.0
    beta: float = 1.0
    stride: int = Field(default=1, ge=1)
    seed: int = 0
    metric: Metric = "chebyshev"
    workers: int = Field(default=1, ge=1)

    def knn(self) -> KnnConfig:
        return KnnConfig(
            k=self.knn_k,
            jitter_sigma=self.jitter_sigma,
            seed=self.seed,
            metric=self.metric,
        )

    def rolling(self, **overrides: int) -> RollingSpec:
        fields: dict[str, int] = {"window": self.window, "stride": self.stride, "lag": self.lag}
        fields.update(overrides)
        return RollingSpec(**fields)

    @classmethod
    def from_env(
        cls,
        environ: Mapping[str, str] | None = None,
        prefix: str = ENV_PREFIX,
        **overrides: Any,
    ) -> AnalysisConfig:
        """Build a config from ``{prefix}{FIELD}`` variables, then apply overrides.

        Overrides whose value is None are ignored, so argparse namespaces can be
        passed through directly.
        """
        env = os.environ if environ is None else environ
        values: dict[str, Any] = {}
        for name in cls.model_fields:
            raw = env.get(f"{prefix}{name.upper()}")
            if raw is not None and raw != "":
                values[name] = raw
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)
