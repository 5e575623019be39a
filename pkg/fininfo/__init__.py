"""Nonparametric information-theoretic analytics for financial return series."""

from fininfo.config import AnalysisConfig, KnnConfig, RollingSpec
from fininfo.errors import FinInfoError
from fininfo.estimators import (
    DiscreteDistribution,
    SampleMatrix,
    discrete_entropy,
    kl_divergence_binned,
    knn_differential_entropy,
    mutual_information_knn,
    nmi_continuous,
)
from fininfo.series import PriceSeries, ReturnSeries

__all__ = [
    "AnalysisConfig",
    "DiscreteDistribution",
    "FinInfoError",
    "KnnConfig",
    "PriceSeries",
    "ReturnSeries",
    "RollingSpec",
    "SampleMatrix",
    "discrete_entropy",
    "kl_divergence_binned",
    "knn_differential_entropy",
    "mutual_information_knn",
    "nmi_continuous",
]
