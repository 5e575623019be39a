"""Time-indexed input series shared by the rolling engine, finance apps and I/O."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
import pandas as pd

from fininfo.errors import AlignmentError, ValidationError

logger = logging.getLogger(__name__)

# Alignment dropping more than this share of either input is reported.
MAX_DROP_FRACTION = 0.10


def _checked_index(timestamps: npt.ArrayLike | pd.Index, n: int, what: str) -> pd.Index:
    index = timestamps if isinstance(timestamps, pd.Index) else pd.Index(timestamps)
    if len(index) != n:
        raise ValidationError(f"{what}: {len(index)} timestamps for {n} values")
    if not (index.is_unique and index.is_monotonic_increasing):
        raise ValidationError(f"{what}: timestamps must be strictly increasing")
    return index


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Log returns (nats per period) keyed by strictly increasing timestamps."""

    timestamps: pd.Index
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float).ravel()
        if values.size < 1:
            raise ValidationError("return series must have at least one value")
        if not np.all(np.isfinite(values)):
            raise ValidationError("return series values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(
            self, "timestamps", _checked_index(self.timestamps, values.size, "return series")
        )

    def __len__(self) -> int:
        return int(self.values.size)

    @classmethod
    def from_series(cls, series: pd.Series) -> ReturnSeries:
        return cls(series.index, series.to_numpy(dtype=float))

    def to_series(self, name: str = "return") -> pd.Series:
        return pd.Series(self.values, index=self.timestamps, name=name)

    def shuffled(self, seed: int) -> ReturnSeries:
        """Same timestamps, values in a random order (destroys temporal dependence)."""
        rng = np.random.Generator(np.random.PCG64(seed))
        return ReturnSeries(self.timestamps, rng.permutation(self.values))


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Positive prices (currency units) keyed by strictly increasing timestamps."""

    timestamps: pd.Index
    prices: np.ndarray

    def __post_init__(self) -> None:
        prices = np.array(self.prices, dtype=float).ravel()
        if not np.all(np.isfinite(prices)):
            raise ValidationError("prices must be finite")
        if np.any(prices <= 0):
            raise ValidationError("prices must be positive")
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(
            self, "timestamps", _checked_index(self.timestamps, prices.size, "price series")
        )

    def __len__(self) -> int:
        return int(self.prices.size)

    def to_series(self, name: str = "price") -> pd.Series:
        return pd.Series(self.prices, index=self.timestamps, name=name)

    def truncated(self, end: object) -> PriceSeries:
        """Observations with timestamp <= ``end``."""
        keep = self.timestamps <= end
        return PriceSeries(self.timestamps[keep], self.prices[keep])


class WindowDiagnostic(NamedTuple):
    timestamp: object
    reason: str


def require_aligned(x: ReturnSeries, y: ReturnSeries) -> None:
    if len(x) != len(y) or not x.timestamps.equals(y.timestamps):
        raise AlignmentError("series timestamps differ; align them first (see align_pair)")


def align_pair(x: ReturnSeries, y: ReturnSeries) -> tuple[ReturnSeries, ReturnSeries]:
    """Restrict both series to their common timestamps.

    Rows present in only one input are dropped; a warning is logged when that
    removes more than 10% of either series.
    """
    common = x.timestamps.intersection(y.timestamps)
    if len(common) == 0:
        raise AlignmentError("series share no timestamps")
    for name, s in (("x", x), ("y", y)):
        dropped = 1.0 - len(common) / len(s)
        if dropped > MAX_DROP_FRACTION:
            logger.warning("alignment dropped %.1f%% of %s's rows", 100 * dropped, name)
    xs = x.to_series().reindex(common)
    ys = y.to_series().reindex(common)
    return ReturnSeries.from_series(xs), ReturnSeries.from_series(ys)


def alignment_gaps(x: ReturnSeries, y: ReturnSeries) -> pd.Index:
    """Timestamps present in only one input, i.e. the rows align_pair drops."""
    return x.timestamps.symmetric_difference(y.timestamps).sort_values()


def lossy_windows(
    first: pd.Index,
    last: pd.Index,
    gaps: pd.Index,
    kept: int,
) -> list[WindowDiagnostic]:
    """Windows spanning [first[i], last[i]] that lost more than 10% of their rows.

    Each window holds ``kept`` aligned rows; the dropped rows are the ``gaps``
    inside its span. Diagnostics are labeled by the window's right edge.
    """
    lost = gaps.searchsorted(last, side="right") - gaps.searchsorted(first, side="left")
    out: list[WindowDiagnostic] = []
    for ts, n_lost in zip(last, lost, strict=True):
        total = kept + int(n_lost)
        if n_lost / total > MAX_DROP_FRACTION:
            out.append(WindowDiagnostic(ts, f"alignment dropped {int(n_lost)} of {total} rows"))
    return out
