"""Seeded synthetic processes with closed-form information quantities.

Every generator draws from ``numpy.random.Generator(PCG64(seed))`` so a GeneratorSpec
reproduces the same series on every platform. Synthetic timestamps are
business days starting 2000-01-03.

Kinds and parameters:
  iid_gaussian              sigma
  iid_uniform               low, high
  correlated_gaussian_pair  sigma, rho                      -> (x, y)
  ar1                       sigma (innovation), phi
  coupled_lag_pair          sigma (x), coupling, sigma_eps  -> (x, y), y[t+1] = c x[t] + eps
  variance_switch           sigma_pre, sigma_post, switch
"""

from __future__ import annotations

import math
from typing import Literal, Self

import numpy as np
import pandas as pd
from pydantic import Field, model_validator
from scipy.signal import lfilter

from fininfo.config import FrozenModel
from fininfo.errors import UnsupportedQuantityError
from fininfo.series import ReturnSeries

SYNTH_START = "2000-01-03"

Kind = Literal[
    "iid_gaussian",
    "iid_uniform",
    "correlated_gaussian_pair",
    "ar1",
    "coupled_lag_pair",
    "variance_switch",
]
Quantity = Literal["entropy", "mi_lag1", "mi_pair", "te_x_to_y", "te_y_to_x", "kl_pre_post"]

PAIR_KINDS = frozenset({"correlated_gaussian_pair", "coupled_lag_pair"})


class GeneratorSpec(FrozenModel):
    kind: Kind
    n: int = Field(default=2016, ge=2)
    seed: int = 0
    sigma: float = Field(default=1.0, gt=0.0)
    low: float = 0.0
    high: float = 1.0
    rho: float = Field(default=0.0, gt=-1.0, lt=1.0)
    phi: float = Field(default=0.0, gt=-1.0, lt=1.0)
    coupling: float = 0.0
    sigma_eps: float = Field(default=1.0, gt=0.0)
    sigma_pre: float = Field(default=0.01, gt=0.0)
    sigma_post: float = Field(default=0.03, gt=0.0)
    switch: int | None = None

    @model_validator(mode="after")
    def _check_ranges(self) -> Self:
        if self.high <= self.low:
            raise ValueError(f"high ({self.high}) must exceed low ({self.low})")
        if self.switch is not None and not 0 < self.switch < self.n:
            raise ValueError(f"switch must be in (0, n={self.n}), got {self.switch}")
        return self

    @property
    def switch_at(self) -> int:
        return self.switch if self.switch is not None else self.n // 2

    @property
    def paired(self) -> bool:
        return self.kind in PAIR_KINDS


def synthetic_index(n: int) -> pd.DatetimeIndex:
    return pd.bdate_range(SYNTH_START, periods=n, name="timestamp")


def generate(spec: GeneratorSpec) -> ReturnSeries | tuple[ReturnSeries, ReturnSeries]:
    """Draw the series described by ``spec``; pair kinds return (x, y)."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = spec.n
    index = synthetic_index(n)

    match spec.kind:
        case "iid_gaussian":
            return ReturnSeries(index, spec.sigma * rng.standard_normal(n))
        case "iid_uniform":
            return ReturnSeries(index, rng.uniform(spec.low, spec.high, n))
        case "correlated_gaussian_pair":
            z = rng.standard_normal((2, n))
            x = spec.sigma * z[0]
            y = spec.sigma * (spec.rho * z[0] + math.sqrt(1.0 - spec.rho**2) * z[1])
            return ReturnSeries(index, x), ReturnSeries(index, y)
        case "ar1":
            eps = spec.sigma * rng.standard_normal(n)
            # First draw from the stationary law so the series has no burn-in.
            eps[0] /= math.sqrt(1.0 - spec.phi**2)
            return ReturnSeries(index, lfilter([1.0], [1.0, -spec.phi], eps))
        case "coupled_lag_pair":
            x = spec.sigma * rng.standard_normal(n)
            eps = spec.sigma_eps * rng.standard_normal(n)
            y = eps.copy()
            y[1:] += spec.coupling * x[:-1]
            return ReturnSeries(index, x), ReturnSeries(index, y)
        case "variance_switch":
            scale = np.where(np.arange(n) < spec.switch_at, spec.sigma_pre, spec.sigma_post)
            return ReturnSeries(index, scale * rng.standard_normal(n))
    raise UnsupportedQuantityError(f"unknown generator kind {spec.kind!r}")


def _gaussian_entropy(variance: float) -> float:
    return 0.5 * math.log(2.0 * math.pi * math.e * variance)


def closed_form(spec: GeneratorSpec, quantity: Quantity) -> float:
    """Analytic value of ``quantity`` for the process ``spec`` describes, in nats.

    ``kl_pre_post`` is D(post-switch law || pre-switch law), the direction the
    rolling KL measures once its current window has moved past the switch.

    Raises:
        UnsupportedQuantityError: if the kind does not define the quantity.
    """
    kind = spec.kind
    if quantity == "entropy":
        if kind == "iid_gaussian":
            return _gaussian_entropy(spec.sigma**2)
        if kind == "iid_uniform":
            return math.log(spec.high - spec.low)
        if kind == "ar1":
            return _gaussian_entropy(spec.sigma**2 / (1.0 - spec.phi**2))
    elif quantity == "mi_lag1":
        if kind == "ar1":
            return -0.5 * math.log(1.0 - spec.phi**2)
        if kind in ("iid_gaussian", "iid_uniform"):
            return 0.0
    elif quantity == "mi_pair":
        if kind == "correlated_gaussian_pair":
            return -0.5 * math.log(1.0 - spec.rho**2)
    elif quantity == "te_x_to_y":
        if kind == "coupled_lag_pair":
            return 0.5 * math.log1p(spec.coupling**2 * spec.sigma**2 / spec.sigma_eps**2)
    elif quantity == "te_y_to_x":
        if kind == "coupled_lag_pair":
            return 0.0
    elif quantity == "kl_pre_post" and kind == "variance_switch":
        ratio = spec.sigma_post**2 / spec.sigma_pre**2
        return 0.5 * (ratio - math.log(ratio) - 1.0)
    raise UnsupportedQuantityError(f"{quantity!r} is not defined for {kind!r}")
