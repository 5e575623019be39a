"""Permutation tests for estimated dependence.

A k-NN estimate of MI, NMI or TE is positive on finite samples even for
independent inputs. Shuffling one input's time order keeps both marginals and
destroys the dependence, so re-estimating on shuffled copies gives a null
distribution to compare the observed value against.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from fininfo.config import KnnConfig
from fininfo.errors import ValidationError
from fininfo.estimators import nmi_continuous
from fininfo.rolling import build_lagged_design, transfer_entropy
from fininfo.series import ReturnSeries, require_aligned

logger = logging.getLogger(__name__)

Statistic = Callable[[np.ndarray, np.ndarray], float]


class PermutationResult(NamedTuple):
    observed: float
    p_value: float
    null_mean: float
    null_q95: float
    n_permutations: int


def permutation_test(
    statistic: Statistic,
    x: npt.ArrayLike,
    y: npt.ArrayLike,
    n_permutations: int = 200,
    seed: int = 0,
    *,
    workers: int = 1,
) -> PermutationResult:
    """Compare ``statistic(x, y)`` against ``statistic(x, y[perm])`` over random perms.

    p = (1 + #{null >= observed}) / (1 + n_permutations), so the smallest
    reportable p-value is 1 / (1 + n_permutations).
    """
    if n_permutations < 1:
        raise ValidationError(f"n_permutations must be >= 1, got {n_permutations}")
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape[0] != ya.shape[0]:
        raise ValidationError(f"length mismatch: {xa.shape[0]} vs {ya.shape[0]}")

    rng = np.random.Generator(np.random.PCG64(seed))
    perms = [rng.permutation(ya.shape[0]) for _ in range(n_permutations)]
    observed = statistic(xa, ya)

    def _null(perm: np.ndarray) -> float:
        return statistic(xa, ya[perm])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            null = np.array(list(pool.map(_null, perms)))
    else:
        null = np.array([_null(p) for p in perms])

    p_value = (1 + int(np.count_nonzero(null >= observed))) / (1 + n_permutations)
    logger.debug("permutation test: observed=%.4g p=%.4g", observed, p_value)
    return PermutationResult(
        observed=float(observed),
        p_value=p_value,
        null_mean=float(null.mean()),
        null_q95=float(np.quantile(null, 0.95)),
        n_permutations=n_permutations,
    )


def nmi_significance(
    x: npt.ArrayLike,
    y: npt.ArrayLike,
    cfg: KnnConfig,
    n_permutations: int = 200,
    *,
    workers: int = 1,
) -> PermutationResult:
    """Permutation test of NMI(x; y), shuffling y."""
    return permutation_test(
        lambda a, b: nmi_continuous(a, b, cfg),
        x,
        y,
        n_permutations,
        seed=cfg.seed,
        workers=workers,
    )


def te_significance(
    source: ReturnSeries,
    target: ReturnSeries,
    cfg: KnnConfig,
    n_permutations: int = 200,
    k: int = 1,
    l: int = 1,  # noqa: E741
    *,
    workers: int = 1,
) -> PermutationResult:
    """Permutation test of T_{source -> target}, shuffling the source's time order."""
    require_aligned(source, target)
    stamps = target.timestamps

    def _te(target_values: np.ndarray, source_values: np.ndarray) -> float:
        design = build_lagged_design(
            ReturnSeries(stamps, source_values), ReturnSeries(stamps, target_values), k, l
        )
        return transfer_entropy(design, cfg)

    return permutation_test(
        _te, target.values, source.values, n_permutations, seed=cfg.seed, workers=workers
    )
