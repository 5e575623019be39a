"""Rolling-window analysis: entropy, KL regime detection, NMI and transfer entropy.

Window conventions
  Every output value is labeled with the timestamp of the last observation its
  window uses (right-edge labeling), so a value at t never depends on data after
  t. With N usable rows, window w and stride s an operation yields
  floor((N - required_history) / s) + 1 values, evaluated at right edges
  required_history - 1, required_history - 1 + s, ... (0-based).

Parallelism
  Windows are independent given the immutable input series. ``workers > 1``
  evaluates them on a thread pool; results are collected in window order, and
  every window uses the same seeded jitter stream, so output does not depend
  on scheduling.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TypeVar

import numpy as np
import pandas as pd

from fininfo.config import KnnConfig, RollingSpec
from fininfo.errors import InsufficientDataError, ValidationError
from fininfo.estimators import (
    Nats,
    _knn_entropy,
    jitter,
    kl_divergence_binned,
    knn_differential_entropy,
    nmi_with_guard,
)
from fininfo.series import (
    ReturnSeries,
    WindowDiagnostic,
    align_pair,
    alignment_gaps,
    lossy_windows,
    require_aligned,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")


# ── Window plumbing ─────────────────────────────────────────────────────────


def _window_ends(n_rows: int, required: int, stride: int) -> np.ndarray:
    """0-based right edges of every evaluation window."""
    if n_rows < required:
        raise InsufficientDataError(f"need at least {required} observations, got {n_rows}")
    return np.arange(required - 1, n_rows, stride)


def _map_windows(fn: Callable[[int], T], ends: np.ndarray, workers: int) -> list[T]:
    if workers <= 1 or len(ends) < 2:
        return [fn(int(e)) for e in ends]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda e: fn(int(e)), ends))


# ── Rolling entropy ─────────────────────────────────────────────────────────


def rolling_entropy(
    r: ReturnSeries,
    spec: RollingSpec,
    cfg: KnnConfig,
    *,
    workers: int = 1,
) -> pd.Series:
    """k-NN differential entropy of each trailing window of ``spec.window`` returns."""
    w = spec.window
    ends = _window_ends(len(r), w, spec.stride)
    values = r.values

    def _one(e: int) -> Nats:
        return knn_differential_entropy(values[e - w + 1 : e + 1], cfg)

    out = _map_windows(_one, ends, workers)
    return pd.Series(out, index=r.timestamps[ends], name="entropy", dtype=float)


# ── KL divergence and regime flags ──────────────────────────────────────────


def rolling_kl(
    r: ReturnSeries,
    spec: RollingSpec,
    bins: int = 50,
    smoothing: float = 1e-10,
    *,
    workers: int = 1,
) -> pd.Series:
    """Histogram KL of each window against the window immediately before it.

    At right edge t: D(r[t-w+1 .. t] || r[t-2w+1 .. t-w]). Stride 1 gives a dense
    daily series; ``spec.non_overlapping()`` gives consecutive disjoint pairs.
    """
    w = spec.window
    ends = _window_ends(len(r), 2 * w, spec.stride)
    values = r.values

    def _one(e: int) -> Nats:
        current = values[e - w + 1 : e + 1]
        reference = values[e - 2 * w + 1 : e - w + 1]
        return kl_divergence_binned(current, reference, bins=bins, smoothing=smoothing)

    out = _map_windows(_one, ends, workers)
    return pd.Series(out, index=r.timestamps[ends], name="kl", dtype=float)


@dataclass(frozen=True, eq=False)
class RegimeSeries:
    timestamps: pd.Index
    kl_nats: np.ndarray
    z_score: np.ndarray
    flag: np.ndarray
    threshold: float

    def __post_init__(self) -> None:
        if np.any(self.kl_nats < 0):
            raise ValidationError("KL values must be non-negative")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"value": self.kl_nats, "z_score": self.z_score, "flag": self.flag},
            index=pd.Index(self.timestamps, name="timestamp"),
        )

    @property
    def flagged(self) -> pd.Index:
        return self.timestamps[self.flag]


def expanding_baseline(kl: pd.Series, min_periods: int = 20) -> tuple[pd.Series, pd.Series]:
    """Mean and standard deviation of KL values strictly before each timestamp."""
    prior = kl.shift(1)
    return (
        prior.expanding(min_periods=min_periods).mean(),
        prior.expanding(min_periods=min_periods).std(),
    )


def standardize_and_flag(
    kl: pd.Series,
    mu: float | None = None,
    sigma: float | None = None,
    threshold: float = 2.0,
    *,
    expanding: bool = False,
    min_periods: int = 20,
) -> RegimeSeries:
    """Z-score a KL series and flag z > threshold.

    With ``mu``/``sigma`` given they are used as-is. Otherwise the baseline is
    the full supplied series, or with ``expanding=True`` the mean and standard
    deviation of values before each point (z is NaN, and the flag off, until
    ``min_periods`` values have accumulated).
    """
    values = kl.to_numpy(dtype=float)
    if expanding and (mu is None or sigma is None):
        mu_t, sigma_t = expanding_baseline(kl, min_periods=min_periods)
        sd = sigma_t.to_numpy(dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            z = np.where(sd > 0, (values - mu_t.to_numpy(dtype=float)) / sd, np.nan)
    else:
        if mu is None:
            mu = float(np.mean(values))
        if sigma is None:
            sigma = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
        if not sigma > 0:
            raise ValidationError(f"sigma must be positive, got {sigma}")
        z = (values - mu) / sigma
    with np.errstate(invalid="ignore"):
        flag = z > threshold
    return RegimeSeries(kl.index, values, z, flag, threshold)


# ── Rolling NMI ─────────────────────────────────────────────────────────────


def lagged_pairs(
    r: ReturnSeries, lag: int, past_len: int = 1
) -> tuple[int, np.ndarray, np.ndarray]:
    """(first row, r_t column, past block) for NMI(r_t; r_{t-lag}, ..., r_{t-lag-past_len+1}).

    Rows without a complete past block are dropped.
    """
    v = r.values
    n = v.size
    start = lag + past_len - 1
    if n <= start:
        raise InsufficientDataError(f"need more than {start} observations for the lag block")
    current = v[start:].reshape(-1, 1)
    past = np.column_stack([v[start - lag - j : n - lag - j] for j in range(past_len)])
    return start, current, past


def rolling_nmi(
    r: ReturnSeries,
    spec: RollingSpec,
    cfg: KnnConfig,
    *,
    workers: int = 1,
    diagnostics: list[WindowDiagnostic] | None = None,
) -> pd.Series:
    """Rolling NMI between r_t and its lagged past, each value in [0, 1].

    ``spec.past_len_target`` = 1 pairs r_t with r_{t-lag}; larger values pair r_t
    with the concatenated block r_{t-lag}, ..., r_{t-lag-k+1}.
    Windows where a marginal entropy estimate is <= 0 are appended to
    ``diagnostics`` when a list is supplied.
    """
    w = spec.window
    required = w + spec.lag + spec.past_len_target - 1
    if len(r) < required:
        raise InsufficientDataError(f"need at least {required} observations, got {len(r)}")
    start, current, past = lagged_pairs(r, spec.lag, spec.past_len_target)
    ends = _window_ends(current.shape[0], w, spec.stride)

    def _one(e: int) -> tuple[float, bool]:
        return nmi_with_guard(current[e - w + 1 : e + 1], past[e - w + 1 : e + 1], cfg)

    results = _map_windows(_one, ends, workers)
    stamps = r.timestamps[ends + start]
    guarded = [ts for ts, (_, hit) in zip(stamps, results, strict=True) if hit]
    if guarded:
        logger.info(
            "%d of %d NMI windows had a non-positive marginal entropy", len(guarded), len(ends)
        )
        if diagnostics is not None:
            diagnostics.extend(
                WindowDiagnostic(ts, "non-positive marginal entropy") for ts in guarded
            )
    return pd.Series([v for v, _ in results], index=stamps, name="nmi", dtype=float)


def efficiency_fraction(nmi: pd.Series, threshold: float = 0.05) -> float:
    """Share of windows whose NMI is below ``threshold``."""
    if len(nmi) == 0:
        raise InsufficientDataError("empty NMI series")
    return float((nmi < threshold).mean())


# ── Transfer entropy ────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class LaggedDesign:
    """Aligned (Y_{t+1}, Y_t^(k), X_t^(l)) rows, labeled by the timestamp of Y_{t+1}."""

    timestamps: pd.Index
    target_future: np.ndarray
    target_past: np.ndarray
    source_past: np.ndarray

    def __post_init__(self) -> None:
        n = self.target_future.shape[0]
        sizes = {self.target_past.shape[0], self.source_past.shape[0], len(self.timestamps)}
        if sizes != {n}:
            raise ValidationError("design blocks must have the same number of rows")

    @property
    def n_rows(self) -> int:
        return int(self.target_future.shape[0])

    @property
    def k(self) -> int:
        return int(self.target_past.shape[1])

    @property
    def l(self) -> int:  # noqa: E743
        return int(self.source_past.shape[1])

    def rows(self, start: int, stop: int) -> LaggedDesign:
        return LaggedDesign(
            self.timestamps[start:stop],
            self.target_future[start:stop],
            self.target_past[start:stop],
            self.source_past[start:stop],
        )

    def matrix(self) -> np.ndarray:
        """Columns [Y_{t+1} | Y_t^(k) | X_t^(l)]."""
        return np.column_stack([self.target_future, self.target_past, self.source_past])


def build_lagged_design(
    x: ReturnSeries,
    y: ReturnSeries,
    k: int = 1,
    l: int = 1,  # noqa: E741
) -> LaggedDesign:
    """Lagged blocks for T_{X -> Y}: Y's next value, k past values of Y, l past values of X.

    Rows start at t = max(k, l) and end at t = N - 2, giving N - max(k, l) - 1 rows.

    Raises:
        AlignmentError: if x and y are not on identical timestamps.
        InsufficientDataError: if N <= max(k, l) + 1.
    """
    if k < 1 or l < 1:
        raise ValidationError(f"past lengths must be >= 1, got k={k}, l={l}")
    require_aligned(x, y)
    n = len(y)
    m = max(k, l)
    if n <= m + 1:
        raise InsufficientDataError(f"need more than {m + 1} observations, got {n}")
    t = np.arange(m, n - 1)
    xv, yv = x.values, y.values
    return LaggedDesign(
        timestamps=y.timestamps[t + 1],
        target_future=yv[t + 1],
        target_past=np.column_stack([yv[t - j] for j in range(k)]),
        source_past=np.column_stack([xv[t - j] for j in range(l)]),
    )


def transfer_entropy(design: LaggedDesign, cfg: KnnConfig) -> Nats:
    """T_{X -> Y} = h(Y+, Yk) + h(Yk, Xl) - h(Y+, Yk, Xl) - h(Yk), clipped at 0."""
    if design.n_rows < cfg.k + 1:
        raise InsufficientDataError(f"need at least {cfg.k + 1} design rows, got {design.n_rows}")
    points = jitter(design.matrix(), cfg).data
    k = design.k
    fut_past = points[:, : 1 + k]
    past = points[:, 1 : 1 + k]
    past_src = points[:, 1:]
    te = (
        _knn_entropy(fut_past, cfg)
        + _knn_entropy(past_src, cfg)
        - _knn_entropy(points, cfg)
        - _knn_entropy(past, cfg)
    )
    return max(0.0, te)


def transfer_entropy_between(
    x: ReturnSeries,
    y: ReturnSeries,
    cfg: KnnConfig,
    k: int = 1,
    l: int = 1,  # noqa: E741
) -> Nats:
    """T_{X -> Y} over the whole aligned sample."""
    return transfer_entropy(build_lagged_design(x, y, k, l), cfg)


def rolling_transfer_entropy(
    x: ReturnSeries,
    y: ReturnSeries,
    spec: RollingSpec,
    cfg: KnnConfig,
    *,
    workers: int = 1,
    diagnostics: list[WindowDiagnostic] | None = None,
) -> pd.Series:
    """T_{X -> Y} over each trailing window of ``spec.window`` design rows.

    Inputs on different timestamps are first restricted to their common
    timestamps. Windows that lose more than 10% of their rows that way are
    appended to ``diagnostics`` when a list is supplied.
    """
    gaps = alignment_gaps(x, y)
    if len(gaps):
        x, y = align_pair(x, y)
    m = max(spec.past_len_target, spec.past_len_source)
    required = spec.window + m + 1
    if len(y) < required:
        raise InsufficientDataError(f"need at least {required} observations, got {len(y)}")
    design = build_lagged_design(x, y, spec.past_len_target, spec.past_len_source)
    w = spec.window
    ends = _window_ends(design.n_rows, w, spec.stride)

    def _one(e: int) -> Nats:
        return transfer_entropy(design.rows(e - w + 1, e + 1), cfg)

    out = _map_windows(_one, ends, workers)
    stamps = design.timestamps
    if len(gaps):
        lossy = lossy_windows(stamps[ends - w + 1], stamps[ends], gaps, w)
        if lossy:
            logger.warning(
                "%d of %d TE windows lost more than 10%% of rows to alignment, first at %s",
                len(lossy),
                len(ends),
                lossy[0].timestamp,
            )
            if diagnostics is not None:
                diagnostics.extend(lossy)
    return pd.Series(out, index=stamps[ends], name="te", dtype=float)
