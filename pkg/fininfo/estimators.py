"""Information-theoretic estimators for discrete tables and continuous samples.

Everything here is a pure function of its inputs plus the seed in ``KnnConfig``;
there is no module-level state, so calls are safe from any number of threads.
All quantities are in nats.

Discrete side
  Tables are ``DiscreteDistribution`` objects. A joint table over X x Y is a 2-D
  ``probs`` array with X along rows and Y along columns.

Continuous side
  Differential entropy uses the Kozachenko-Leonenko k-nearest-neighbor estimator

      h = psi(N) - psi(k) + log c_d + (d / N) * sum_i log rho_k(i)

  where rho_k(i) is the distance from sample i to its k-th neighbor and c_d the
  volume of the metric's unit ball. Under the default maximum-coordinate metric
  c_d = 2^d and the last two terms collapse to (d / N) * sum_i log eps(i), with
  eps(i) = 2 rho_k(i) the side of the enclosing cube. Mutual information, NMI and
  total correlation combine marginal and joint entropies of one jittered sample,
  so marginal and joint estimates always see the same points.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.spatial import cKDTree
from scipy.special import entr, rel_entr

from fininfo.config import KnnConfig
from fininfo.errors import (
    DegenerateDistanceError,
    DegenerateRangeError,
    DivergenceUndefinedError,
    InsufficientDataError,
    InvalidDistributionError,
    UndefinedNormalizationError,
    ValidationError,
)
from fininfo.special import digamma, log_unit_ball_volume

logger = logging.getLogger(__name__)

_SUM_TOL = 1e-9
# Entropies within this of zero are zero (marginals can sum to 1 + ulp).
_ENTROPY_TOL = 1e-12

Nats = float


# ── Domain types ────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Probability masses, 1-D for a single variable or 2-D for a joint table."""

    probs: np.ndarray
    labels: tuple | None = None

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=float)
        if probs.ndim == 0 or probs.size == 0:
            raise InvalidDistributionError("distribution needs at least one outcome")
        if not np.all(np.isfinite(probs)):
            raise InvalidDistributionError("probabilities must be finite")
        if np.any(probs < 0):
            raise InvalidDistributionError("probabilities must be non-negative")
        total = math.fsum(probs.ravel())
        if abs(total - 1.0) > _SUM_TOL:
            raise InvalidDistributionError(f"probabilities sum to {total!r}, expected 1")
        if self.labels is not None and len(self.labels) != probs.shape[0]:
            raise InvalidDistributionError("labels must match the leading dimension")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_counts(
        cls, counts: npt.ArrayLike, labels: Sequence | None = None
    ) -> DiscreteDistribution:
        arr = np.asarray(counts, dtype=float)
        total = arr.sum()
        if total <= 0:
            raise InvalidDistributionError("counts must have a positive total")
        return cls(arr / total, tuple(labels) if labels is not None else None)

    @classmethod
    def product(cls, p: DiscreteDistribution, q: DiscreteDistribution) -> DiscreteDistribution:
        """Joint table of independent X ~ p, Y ~ q."""
        return cls(np.outer(_as_dist(p).probs, _as_dist(q).probs))

    @property
    def support_size(self) -> int:
        return int(self.probs.size)


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """N observations of a d-dimensional variable."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=float)
        if data.ndim == 1:
            data = data.reshape(-1, 1)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValidationError(
                f"samples must be an N x d array with N, d >= 1, got {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise ValidationError("samples must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return int(self.data.shape[0])

    @property
    def d(self) -> int:
        return int(self.data.shape[1])

    def column(self, i: int) -> SampleMatrix:
        return SampleMatrix(self.data[:, i])


@dataclass(frozen=True, eq=False)
class BinnedDistribution:
    """Histogram masses over shared bin edges, smoothed and renormalized."""

    edges: np.ndarray
    probs: np.ndarray
    smoothing: float

    def __post_init__(self) -> None:
        edges = np.asarray(self.edges, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if probs.size < 2 or edges.size != probs.size + 1:
            raise ValidationError("need B >= 2 bins and B + 1 edges")
        if np.any(np.diff(edges) <= 0):
            raise ValidationError("bin edges must be strictly increasing")
        if abs(math.fsum(probs) - 1.0) > _SUM_TOL:
            raise InvalidDistributionError("binned probabilities must sum to 1")

    def as_distribution(self) -> DiscreteDistribution:
        return DiscreteDistribution(self.probs)


def as_samples(samples: SampleMatrix | npt.ArrayLike) -> SampleMatrix:
    if isinstance(samples, SampleMatrix):
        return samples
    return SampleMatrix(np.asarray(samples, dtype=float))


def _as_dist(p: DiscreteDistribution | npt.ArrayLike) -> DiscreteDistribution:
    if isinstance(p, DiscreteDistribution):
        return p
    return DiscreteDistribution(np.asarray(p, dtype=float))


def _as_joint(joint: DiscreteDistribution | npt.ArrayLike) -> np.ndarray:
    table = _as_dist(joint).probs
    if table.ndim != 2:
        raise InvalidDistributionError(f"joint table must be 2-D (X x Y), got shape {table.shape}")
    return table


# ── Discrete tables ─────────────────────────────────────────────────────────


def discrete_entropy(p: DiscreteDistribution | npt.ArrayLike) -> Nats:
    """Shannon entropy -sum p log p with 0 log 0 = 0."""
    return math.fsum(entr(_as_dist(p).probs).ravel())


def joint_entropy(joint: DiscreteDistribution | npt.ArrayLike) -> Nats:
    return math.fsum(entr(_as_joint(joint)).ravel())


def marginals(joint: DiscreteDistribution | npt.ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    """Row (X) and column (Y) marginals of a joint table."""
    table = _as_joint(joint)
    return table.sum(axis=1), table.sum(axis=0)


def conditional_entropy(joint: DiscreteDistribution | npt.ArrayLike) -> Nats:
    """H(Y|X) = sum_x p(x) H(Y | X = x), evaluated row by row."""
    table = _as_joint(joint)
    terms: list[float] = []
    for row in table:
        px = math.fsum(row)
        if px <= 0.0:
            continue
        terms.append(px * math.fsum(entr(row / px)))
    return math.fsum(terms)


def _marginal_entropies(table: np.ndarray) -> tuple[Nats, Nats]:
    hx = math.fsum(entr(table.sum(axis=1)))
    hy = math.fsum(entr(table.sum(axis=0)))
    return (
        0.0 if hx <= _ENTROPY_TOL else hx,
        0.0 if hy <= _ENTROPY_TOL else hy,
    )


def mutual_information_discrete(joint: DiscreteDistribution | npt.ArrayLike) -> Nats:
    """I(X;Y) = H(X) + H(Y) - H(X,Y), clamped to [0, min(H(X), H(Y))].

    The entropy form stays finite when p(x) p(y) underflows for a cell with
    positive mass; rounding is the only thing the clamp removes.
    """
    table = _as_joint(joint)
    hx = math.fsum(entr(table.sum(axis=1)))
    hy = math.fsum(entr(table.sum(axis=0)))
    mi = math.fsum([hx, hy, -joint_entropy(table)])
    return min(max(0.0, mi), max(0.0, min(hx, hy)))


def nmi_discrete(joint: DiscreteDistribution | npt.ArrayLike) -> float:
    """I(U;V) / sqrt(H(U) H(V)) on a contingency table, in [0, 1].

    Raises:
        UndefinedNormalizationError: if either marginal entropy is zero
            (within 1e-12 nats).
    """
    table = _as_joint(joint)
    hu, hv = _marginal_entropies(table)
    if hu == 0.0 or hv == 0.0:
        raise UndefinedNormalizationError(
            f"NMI undefined with a zero marginal entropy (H(U)={hu:.3g}, H(V)={hv:.3g})"
        )
    nmi = mutual_information_discrete(table) / (math.sqrt(hu) * math.sqrt(hv))
    return min(1.0, max(0.0, nmi))


def kl_divergence_discrete(
    p: DiscreteDistribution | npt.ArrayLike,
    q: DiscreteDistribution | npt.ArrayLike,
) -> Nats:
    """D(p || q) = sum p log(p / q).

    Raises:
        InvalidDistributionError: if p and q are over different supports.
        DivergenceUndefinedError: if q(x) = 0 somewhere p(x) > 0.
    """
    pp, qq = _as_dist(p).probs, _as_dist(q).probs
    if pp.shape != qq.shape:
        raise InvalidDistributionError(f"support mismatch: {pp.shape} vs {qq.shape}")
    terms = rel_entr(pp, qq)
    if np.any(np.isinf(terms)):
        raise DivergenceUndefinedError("q has zero mass where p is positive; smooth q first")
    return max(0.0, math.fsum(terms.ravel()))


def total_variation(
    p: DiscreteDistribution | npt.ArrayLike,
    q: DiscreteDistribution | npt.ArrayLike,
) -> float:
    pp, qq = _as_dist(p).probs, _as_dist(q).probs
    if pp.shape != qq.shape:
        raise InvalidDistributionError(f"support mismatch: {pp.shape} vs {qq.shape}")
    return 0.5 * math.fsum(np.abs(pp - qq).ravel())


# ── Histogram KL ────────────────────────────────────────────────────────────


def binned_distributions(
    current: SampleMatrix | npt.ArrayLike,
    reference: SampleMatrix | npt.ArrayLike,
    bins: int = 50,
    smoothing: float = 1e-10,
) -> tuple[BinnedDistribution, BinnedDistribution]:
    """Histogram both samples on equal-width edges spanning the pooled range.

    ``smoothing`` is added to every bin count before normalizing, so the
    reference has positive mass everywhere whenever smoothing > 0.
    """
    if bins < 2:
        raise ValidationError(f"bins must be >= 2, got {bins}")
    if smoothing < 0:
        raise ValidationError(f"smoothing must be >= 0, got {smoothing}")
    cur, ref = _univariate(current), _univariate(reference)
    pooled = np.concatenate([cur, ref])
    if np.unique(pooled).size < 2:
        raise DegenerateRangeError("pooled sample has fewer than 2 distinct values")
    edges = np.histogram_bin_edges(pooled, bins=bins)
    out = []
    for sample in (cur, ref):
        counts, _ = np.histogram(sample, bins=edges)
        mass = counts.astype(float) + smoothing
        out.append(BinnedDistribution(edges=edges, probs=mass / mass.sum(), smoothing=smoothing))
    return out[0], out[1]


def kl_divergence_binned(
    current: SampleMatrix | npt.ArrayLike,
    reference: SampleMatrix | npt.ArrayLike,
    bins: int = 50,
    smoothing: float = 1e-10,
) -> Nats:
    """D(current || reference) on shared histogram bins, no bin-width factor."""
    p, q = binned_distributions(current, reference, bins=bins, smoothing=smoothing)
    return kl_divergence_discrete(p.probs, q.probs)


def _univariate(samples: SampleMatrix | npt.ArrayLike) -> np.ndarray:
    sm = as_samples(samples)
    if sm.d != 1:
        raise ValidationError(f"expected a univariate sample, got d={sm.d}")
    return sm.data[:, 0]


# ── k-NN estimators ─────────────────────────────────────────────────────────


def jitter(samples: SampleMatrix | npt.ArrayLike, cfg: KnnConfig) -> SampleMatrix:
    """Add N(0, jitter_sigma^2) noise drawn from a PCG64 stream seeded by cfg.seed."""
    sm = as_samples(samples)
    if cfg.jitter_sigma == 0.0:
        return sm
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    return SampleMatrix(sm.data + rng.normal(0.0, cfg.jitter_sigma, size=sm.data.shape))


def _knn_entropy(points: np.ndarray, cfg: KnnConfig) -> Nats:
    """Kozachenko-Leonenko entropy of already-jittered points (N x d)."""
    n, d = points.shape
    if n < cfg.k + 1:
        raise InsufficientDataError(f"need N >= k + 1 = {cfg.k + 1} samples, got {n}")
    p = np.inf if cfg.metric == "chebyshev" else 2.0
    tree = cKDTree(points)
    dist, _ = tree.query(points, k=cfg.k + 1, p=p, workers=cfg.workers)
    rho = dist[:, cfg.k]
    if np.any(rho <= 0.0):
        raise DegenerateDistanceError(
            f"{int(np.sum(rho <= 0.0))} samples have a zero k-th neighbor distance;"
            " duplicate points need jitter_sigma > 0"
        )
    return (
        digamma(n)
        - digamma(cfg.k)
        + log_unit_ball_volume(d, cfg.metric)
        + d * float(np.mean(np.log(rho)))
    )


def knn_differential_entropy(samples: SampleMatrix | npt.ArrayLike, cfg: KnnConfig) -> Nats:
    """Differential entropy h(X) of a d-dimensional sample."""
    return _knn_entropy(jitter(samples, cfg).data, cfg)


def _joint_points(
    x: SampleMatrix | npt.ArrayLike,
    y: SampleMatrix | npt.ArrayLike,
    cfg: KnnConfig,
) -> tuple[np.ndarray, int]:
    xs, ys = as_samples(x), as_samples(y)
    if xs.n != ys.n:
        raise ValidationError(f"length mismatch: x has {xs.n} rows, y has {ys.n}")
    joint = jitter(np.hstack([xs.data, ys.data]), cfg).data
    return joint, xs.d


def _mi_terms(
    x: SampleMatrix | npt.ArrayLike,
    y: SampleMatrix | npt.ArrayLike,
    cfg: KnnConfig,
) -> tuple[Nats, Nats, Nats]:
    """(h(X), h(Y), h(X,Y)) from one jittered joint sample."""
    joint, dx = _joint_points(x, y, cfg)
    hx = _knn_entropy(joint[:, :dx], cfg)
    hy = _knn_entropy(joint[:, dx:], cfg)
    hxy = _knn_entropy(joint, cfg)
    return hx, hy, hxy


def mutual_information_knn(
    x: SampleMatrix | npt.ArrayLike,
    y: SampleMatrix | npt.ArrayLike,
    cfg: KnnConfig,
) -> Nats:
    """I(X;Y) = max(0, h(X) + h(Y) - h(X,Y))."""
    hx, hy, hxy = _mi_terms(x, y, cfg)
    return max(0.0, hx + hy - hxy)


def nmi_with_guard(
    x: SampleMatrix | npt.ArrayLike,
    y: SampleMatrix | npt.ArrayLike,
    cfg: KnnConfig,
) -> tuple[float, bool]:
    """NMI plus whether a marginal entropy estimate was <= 0.

    The second value lets rolling callers report windows where the
    normalization was computed from (or zeroed by) non-positive entropies.
    """
    hx, hy, hxy = _mi_terms(x, y, cfg)
    mi = max(0.0, hx + hy - hxy)
    nonpositive = hx <= 0.0 or hy <= 0.0
    denom = hx * hy
    if denom <= 0.0:
        return 0.0, nonpositive
    return min(1.0, max(0.0, mi / math.sqrt(denom))), nonpositive


def nmi_continuous(
    x: SampleMatrix | npt.ArrayLike,
    y: SampleMatrix | npt.ArrayLike,
    cfg: KnnConfig,
) -> float:
    """MI / sqrt(h(X) h(Y)) when h(X) h(Y) > 0, else 0; clamped to [0, 1].

    ``y`` may be multi-dimensional (a block of past values).
    """
    nmi, nonpositive = nmi_with_guard(x, y, cfg)
    if nonpositive:
        logger.debug("NMI computed with a non-positive marginal entropy estimate")
    return nmi


def total_correlation(samples: SampleMatrix | npt.ArrayLike, cfg: KnnConfig) -> Nats:
    """max(0, sum_i h(R_i) - h(R)) for a d >= 2 sample."""
    sm = as_samples(samples)
    if sm.d < 2:
        raise ValidationError(f"total correlation needs d >= 2, got d={sm.d}")
    points = jitter(sm, cfg).data
    marginal = sum(_knn_entropy(points[:, [i]], cfg) for i in range(sm.d))
    return max(0.0, marginal - _knn_entropy(points, cfg))
