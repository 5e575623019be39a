"""Finance procedures built on the estimators.

- log returns from prices
- entropy-adjusted VaR (multiplier driven by the standardized KL divergence)
- the information-theoretic diversification functional and a simplex optimizer
- NMI momentum signals and a minimal one-step-ahead backtester
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
import numpy.typing as npt
import pandas as pd
from pydantic import Field

from fininfo.config import FrozenModel, KnnConfig, RollingSpec
from fininfo.errors import AlignmentError, InsufficientDataError, ValidationError
from fininfo.estimators import SampleMatrix, _knn_entropy, as_samples, jitter
from fininfo.rolling import rolling_kl, rolling_nmi, standardize_and_flag
from fininfo.series import PriceSeries, ReturnSeries

logger = logging.getLogger(__name__)

# Sensitivity range over which the VaR adjustment is calibrated.
BETA_RANGE = (0.5, 1.5)

_WEIGHT_TOL = 1e-9

Sense = Literal["minimize", "maximize"]


def log_returns(p: PriceSeries) -> ReturnSeries:
    """r_t = ln(P_t / P_{t-1}), labeled with the later timestamp of each pair."""
    if len(p) < 2:
        raise InsufficientDataError(f"need at least 2 prices, got {len(p)}")
    return ReturnSeries(p.timestamps[1:], np.diff(np.log(p.prices)))


# ── Entropy-adjusted VaR ────────────────────────────────────────────────────


class VarAdjustmentInputs(FrozenModel):
    base_var: float = Field(gt=0.0, allow_inf_nan=False)
    kl_now: float = Field(ge=0.0, allow_inf_nan=False)
    mu_kl: float = Field(allow_inf_nan=False)
    sigma_kl: float = Field(gt=0.0, allow_inf_nan=False)
    beta: float = Field(default=1.0, allow_inf_nan=False)


def var_multiplier(inp: VarAdjustmentInputs) -> float:
    """1 + beta * max(0, (kl_now - mu_kl) / sigma_kl)."""
    if not BETA_RANGE[0] <= inp.beta <= BETA_RANGE[1]:
        logger.warning(
            "beta=%g is outside the calibrated range [%g, %g]", inp.beta, *BETA_RANGE
        )
    z = (inp.kl_now - inp.mu_kl) / inp.sigma_kl
    return 1.0 + inp.beta * max(0.0, z)


def entropy_adjusted_var(inp: VarAdjustmentInputs) -> float:
    """Base VaR scaled up when the current KL divergence sits above its baseline.

    Never below ``base_var`` for beta >= 0.
    """
    return inp.base_var * var_multiplier(inp)


def entropy_adjusted_var_series(
    r: ReturnSeries,
    base_var: float,
    spec: RollingSpec,
    bins: int = 50,
    smoothing: float = 1e-10,
    beta: float = 1.0,
    threshold: float = 2.0,
    *,
    workers: int = 1,
) -> pd.DataFrame:
    """Adjusted VaR over time from rolling KL with a full-sample baseline.

    Returns a frame indexed by timestamp with columns kl, z_score, flag,
    multiplier and adjusted_var.
    """
    if base_var <= 0:
        raise ValidationError(f"base_var must be positive, got {base_var}")
    if not BETA_RANGE[0] <= beta <= BETA_RANGE[1]:
        logger.warning("beta=%g is outside the calibrated range [%g, %g]", beta, *BETA_RANGE)
    kl = rolling_kl(r, spec, bins=bins, smoothing=smoothing, workers=workers)
    regime = standardize_and_flag(kl, threshold=threshold)
    multiplier = 1.0 + beta * np.maximum(0.0, regime.z_score)
    return pd.DataFrame(
        {
            "kl": regime.kl_nats,
            "z_score": regime.z_score,
            "flag": regime.flag,
            "multiplier": multiplier,
            "adjusted_var": base_var * multiplier,
        },
        index=pd.Index(kl.index, name="timestamp"),
    )


# ── Diversification ─────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class PortfolioWeights:
    """Long-only weights summing to 1."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float).ravel()
        if w.size < 1 or not np.all(np.isfinite(w)):
            raise ValidationError("weights must be a non-empty finite vector")
        if np.any(w < 0):
            raise ValidationError("weights must be non-negative (long-only)")
        if abs(math.fsum(w) - 1.0) > _WEIGHT_TOL:
            raise ValidationError(f"weights sum to {math.fsum(w)!r}, expected 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return int(self.weights.size)

    @classmethod
    def equal(cls, n: int) -> PortfolioWeights:
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def normalized(cls, raw: npt.ArrayLike) -> PortfolioWeights:
        """Rescale non-negative raw weights onto the simplex."""
        w = np.asarray(raw, dtype=float).ravel()
        if np.any(w < 0):
            raise ValidationError(f"weights must be non-negative (long-only), got {w.tolist()}")
        total = w.sum()
        if total <= 0:
            raise ValidationError("weights have no positive mass")
        return cls(w / total)


def diversification_objective(
    w: PortfolioWeights,
    assets: SampleMatrix | npt.ArrayLike,
    cfg: KnnConfig,
) -> float:
    """J(w) = sum_i w_i h(R_i) - h(w^T R).

    Assets and portfolio column come from one jittered sample; the portfolio
    return is the weighted row sum of that sample.
    """
    sm = as_samples(assets)
    if w.n != sm.d:
        raise ValidationError(f"{w.n} weights for {sm.d} assets")
    points = jitter(sm, cfg).data
    portfolio = (points @ w.weights).reshape(-1, 1)
    weighted = math.fsum(
        wi * _knn_entropy(points[:, [i]], cfg) for i, wi in enumerate(w.weights) if wi > 0
    )
    return weighted - _knn_entropy(portfolio, cfg)


class OptimizationResult(NamedTuple):
    weights: PortfolioWeights
    objective: float
    evaluations: int


def _transfers(w: np.ndarray, step: float) -> list[np.ndarray]:
    """Moves of up to ``step`` mass from coordinate j to coordinate i, for all i != j."""
    out = []
    n = w.size
    for i in range(n):
        for j in range(n):
            if i == j or w[j] <= 0:
                continue
            cand = w.copy()
            delta = min(step, w[j])
            cand[i] += delta
            cand[j] -= delta
            out.append(cand / cand.sum())
    return out


def optimize_diversification(
    assets: SampleMatrix | npt.ArrayLike,
    sense: Sense,
    cfg: KnnConfig,
    budget: int,
    initial: PortfolioWeights | None = None,
    *,
    workers: int = 1,
) -> OptimizationResult:
    """Derivative-free search for the weights minimizing or maximizing J(w).

    Half the budget goes to the starting point (``initial`` or equal weights)
    plus Dirichlet(1) draws, which sample the simplex uniformly; the rest goes
    to pairwise mass transfers around the incumbent with a halving step. All
    candidates derive from ``cfg.seed`` and each evaluation uses the same jitter,
    so the result is deterministic for any ``workers``.

    Raises:
        ValidationError: n < 2, an unknown sense, or budget < n (budget < 1
            when ``initial`` is given).
    """
    sm = as_samples(assets)
    n = sm.d
    if n < 2:
        raise ValidationError(f"need at least 2 assets, got {n}")
    if sense not in ("minimize", "maximize"):
        raise ValidationError(f"sense must be 'minimize' or 'maximize', got {sense!r}")
    floor = 1 if initial is not None else n
    if budget < floor:
        raise ValidationError(f"budget must be >= {floor}, got {budget}")
    start = initial if initial is not None else PortfolioWeights.equal(n)
    if start.n != n:
        raise ValidationError(f"{start.n} initial weights for {n} assets")

    sign = 1.0 if sense == "minimize" else -1.0
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    spent = 0

    def _score(batch: list[np.ndarray]) -> list[float]:
        nonlocal spent
        spent += len(batch)

        def one(wv: np.ndarray) -> float:
            return sign * diversification_objective(PortfolioWeights(wv), sm, cfg)

        if workers <= 1 or len(batch) < 2:
            return [one(wv) for wv in batch]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, batch))

    n_global = max(1, (budget + 1) // 2)
    batch = [start.weights.copy()]
    batch += list(rng.dirichlet(np.ones(n), size=n_global - 1))
    scores = _score(batch)
    best_i = int(np.argmin(scores))
    best_w, best_s = batch[best_i], scores[best_i]

    step = 0.25
    while spent < budget and step >= 1e-4:
        cands = _transfers(best_w, step)[: budget - spent]
        if not cands:
            break
        scores = _score(cands)
        i = int(np.argmin(scores))
        if scores[i] < best_s:
            best_w, best_s = cands[i], scores[i]
        else:
            step /= 2.0

    if best_w is batch[0]:
        logger.info("no candidate improved on the starting weights in %d evaluations", spent)
    return OptimizationResult(PortfolioWeights(best_w), sign * best_s, spent)


# ── Signals and backtest ────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class SignalSeries:
    timestamps: pd.Index
    signals: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.signals)
        if s.size and not np.all(np.isin(s, (-1, 0, 1))):
            raise ValidationError("signals must be -1, 0 or +1")
        s = s.astype(np.int8)
        if len(self.timestamps) != s.size:
            raise ValidationError(f"{len(self.timestamps)} timestamps for {s.size} signals")
        s.setflags(write=False)
        object.__setattr__(self, "signals", s)

    def __len__(self) -> int:
        return int(self.signals.size)

    def to_series(self, name: str = "signal") -> pd.Series:
        return pd.Series(self.signals, index=self.timestamps, name=name)

    @classmethod
    def from_series(cls, series: pd.Series) -> SignalSeries:
        return cls(series.index, series.to_numpy())


def signals_from_nmi(nmi: pd.Series, returns: ReturnSeries, theta: float = 0.05) -> SignalSeries:
    """Momentum rule: sign of r_{t-1} where NMI_t > theta, else 0.

    A zero previous return maps to -1 (the rule only buys on r_{t-1} > 0).
    """
    if not 0.0 < theta < 1.0:
        raise ValidationError(f"theta must be in (0, 1), got {theta}")
    pos = returns.timestamps.get_indexer(nmi.index)
    if np.any(pos < 0):
        raise AlignmentError("NMI timestamps missing from the return series")
    if np.any(pos < 1):
        raise InsufficientDataError("no previous return for the first NMI timestamp")
    prev = returns.values[pos - 1]
    active = nmi.to_numpy(dtype=float) > theta
    signals = np.where(active, np.where(prev > 0, 1, -1), 0)
    return SignalSeries(nmi.index, signals)


def nmi_trading_signals(
    p: PriceSeries,
    theta: float,
    spec: RollingSpec,
    cfg: KnnConfig,
    *,
    workers: int = 1,
) -> SignalSeries:
    r = log_returns(p)
    nmi = rolling_nmi(r, spec, cfg, workers=workers)
    signals = signals_from_nmi(nmi, r, theta)
    logger.info(
        "%d of %d periods carry a position at theta=%g",
        int(np.count_nonzero(signals.signals)),
        len(signals),
        theta,
    )
    return signals


class BacktestSummary(NamedTuple):
    total_log_return: float
    hit_rate: float
    exposure: float
    n_trades: int
    pnl: pd.Series

    def as_dict(self) -> dict[str, float | int]:
        return {
            "total_log_return": self.total_log_return,
            "hit_rate": self.hit_rate,
            "exposure": self.exposure,
            "n_trades": self.n_trades,
        }


def backtest_signals(
    p: PriceSeries,
    s: SignalSeries,
    cost_per_trade: float = 0.0,
) -> BacktestSummary:
    """PnL_t = s_t * r_{t+1} minus ``cost_per_trade`` per unit of position change.

    The signal at t earns the log return over (t, t+1]; a signal on the last
    price has no realized return and is dropped. PnL is labeled with the
    timestamp at which it is realized. ``hit_rate`` is the share of exposed
    periods with positive gross PnL (0 when never exposed).
    """
    if cost_per_trade < 0:
        raise ValidationError(f"cost_per_trade must be >= 0, got {cost_per_trade}")
    pos = p.timestamps.get_indexer(s.timestamps)
    if np.any(pos < 0):
        raise AlignmentError("signal timestamps missing from the price series")
    keep = pos < len(p) - 1
    pos, sig = pos[keep], s.signals[keep].astype(float)
    logp = np.log(p.prices)
    forward = logp[pos + 1] - logp[pos]
    gross = sig * forward
    changes = np.abs(np.diff(sig, prepend=0.0))
    net = gross - cost_per_trade * changes
    exposed = sig != 0
    n_exposed = int(np.count_nonzero(exposed))
    return BacktestSummary(
        total_log_return=math.fsum(net),
        hit_rate=float(np.mean(gross[exposed] > 0)) if n_exposed else 0.0,
        exposure=n_exposed / sig.size if sig.size else 0.0,
        n_trades=int(np.count_nonzero(changes)),
        pnl=pd.Series(net, index=p.timestamps[pos + 1], name="pnl"),
    )
