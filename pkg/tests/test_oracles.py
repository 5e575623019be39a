"""Synthetic generators and their closed-form information quantities."""

from __future__ import annotations

import math

import numpy as np
import pandas as pd
import pytest

from fininfo.config import KnnConfig
from fininfo.errors import ConfigError, UnsupportedQuantityError, ValidationError
from fininfo.estimators import knn_differential_entropy, mutual_information_knn
from fininfo.oracles import GeneratorSpec, closed_form, generate, synthetic_index


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.corrcoef(a, b)[0, 1])


# ── Group 1: Generators ──────────────────────────────────────────────────────


class TestGenerate:
    def test_same_seed_same_series(self):
        spec = GeneratorSpec(kind="ar1", n=500, seed=42, phi=0.5)
        np.testing.assert_array_equal(generate(spec).values, generate(spec).values)

    def test_seed_changes_series(self):
        a = generate(GeneratorSpec(kind="iid_gaussian", n=100, seed=1))
        b = generate(GeneratorSpec(kind="iid_gaussian", n=100, seed=2))
        assert not np.array_equal(a.values, b.values)

    def test_business_day_timestamps(self):
        r = generate(GeneratorSpec(kind="iid_uniform", n=10))
        assert len(r) == 10
        assert r.timestamps[0] == pd.Timestamp("2000-01-03")
        assert r.timestamps.equals(synthetic_index(10))
        assert all(ts.dayofweek < 5 for ts in r.timestamps)

    def test_gaussian_scale(self):
        r = generate(GeneratorSpec(kind="iid_gaussian", n=20000, seed=3, sigma=2.0))
        assert float(np.std(r.values)) == pytest.approx(2.0, abs=0.05)

    def test_uniform_support(self):
        r = generate(GeneratorSpec(kind="iid_uniform", n=5000, seed=4, low=-1.0, high=3.0))
        assert r.values.min() >= -1.0
        assert r.values.max() < 3.0

    def test_correlated_pair(self):
        x, y = generate(GeneratorSpec(kind="correlated_gaussian_pair", n=20000, seed=5, rho=0.6))
        assert _corr(x.values, y.values) == pytest.approx(0.6, abs=0.02)
        assert x.timestamps.equals(y.timestamps)

    def test_ar1_is_stationary_from_first_draw(self):
        spec = GeneratorSpec(kind="ar1", n=20000, seed=6, phi=0.8)
        v = generate(spec).values
        assert _corr(v[1:], v[:-1]) == pytest.approx(0.8, abs=0.02)
        assert float(np.var(v)) == pytest.approx(1 / (1 - 0.64), rel=0.1)
        firsts = [generate(spec.model_copy(update={"seed": s})).values[0] for s in range(400)]
        assert float(np.std(firsts)) == pytest.approx(math.sqrt(1 / 0.36), rel=0.15)

    def test_coupled_pair_lags_by_one(self):
        x, y = generate(GeneratorSpec(kind="coupled_lag_pair", n=20000, seed=7, coupling=0.8))
        assert _corr(y.values[1:], x.values[:-1]) == pytest.approx(0.8 / math.sqrt(1.64), abs=0.02)
        assert _corr(x.values[1:], y.values[:-1]) == pytest.approx(0.0, abs=0.03)

    def test_variance_switch(self):
        spec = GeneratorSpec(kind="variance_switch", n=4000, seed=8)
        v = generate(spec).values
        assert spec.switch_at == 2000
        assert float(np.std(v[:2000])) == pytest.approx(0.01, rel=0.1)
        assert float(np.std(v[2000:])) == pytest.approx(0.03, rel=0.1)

    def test_explicit_switch(self):
        spec = GeneratorSpec(kind="variance_switch", n=100, switch=10)
        assert spec.switch_at == 10
        assert not spec.paired
        assert GeneratorSpec(kind="coupled_lag_pair").paired


class TestGeneratorSpec:
    @pytest.mark.parametrize(
        "fields",
        [
            {"kind": "brownian"},
            {"kind": "iid_uniform", "low": 1.0, "high": 1.0},
            {"kind": "variance_switch", "n": 100, "switch": 100},
            {"kind": "correlated_gaussian_pair", "rho": 1.0},
            {"kind": "ar1", "phi": -1.0},
            {"kind": "iid_gaussian", "n": 1},
            {"kind": "iid_gaussian", "sigma": 0.0},
        ],
    )
    def test_rejected(self, fields):
        with pytest.raises(ConfigError):
            GeneratorSpec(**fields)


# ── Group 2: Closed forms ────────────────────────────────────────────────────


class TestClosedForm:
    @pytest.mark.parametrize(
        ("fields", "quantity", "expected"),
        [
            ({"kind": "iid_gaussian"}, "entropy", 1.418939),
            ({"kind": "iid_gaussian", "sigma": 0.01}, "entropy", 1.418939 + math.log(0.01)),
            ({"kind": "iid_uniform", "low": 0.0, "high": 4.0}, "entropy", math.log(4.0)),
            ({"kind": "ar1", "phi": 0.8}, "mi_lag1", 0.510826),
            ({"kind": "ar1", "phi": 0.8}, "entropy", 1.418939 - 0.5 * math.log(0.36)),
            ({"kind": "iid_gaussian"}, "mi_lag1", 0.0),
            ({"kind": "correlated_gaussian_pair", "rho": 0.5}, "mi_pair", 0.143841),
            ({"kind": "coupled_lag_pair", "coupling": 0.8}, "te_x_to_y", 0.5 * math.log(1.64)),
            ({"kind": "coupled_lag_pair", "coupling": 0.8}, "te_y_to_x", 0.0),
            ({"kind": "variance_switch"}, "kl_pre_post", 0.5 * (8.0 - math.log(9.0))),
        ],
    )
    def test_values(self, fields, quantity, expected):
        assert closed_form(GeneratorSpec(**fields), quantity) == pytest.approx(expected, abs=1e-6)

    @pytest.mark.parametrize(
        ("kind", "quantity"),
        [
            ("iid_gaussian", "te_x_to_y"),
            ("variance_switch", "entropy"),
            ("ar1", "kl_pre_post"),
            ("coupled_lag_pair", "mi_pair"),
        ],
    )
    def test_unsupported(self, kind, quantity):
        with pytest.raises(UnsupportedQuantityError):
            closed_form(GeneratorSpec(kind=kind), quantity)

    def test_unsupported_is_a_validation_error(self):
        with pytest.raises(ValidationError):
            closed_form(GeneratorSpec(kind="iid_uniform"), "te_y_to_x")


@pytest.mark.acceptance
class TestEstimatesMatchClosedForms:
    def test_uniform_entropy(self):
        spec = GeneratorSpec(kind="iid_uniform", n=4000, seed=9, low=0.0, high=2.0)
        h = knn_differential_entropy(generate(spec).values, KnnConfig())
        assert h == pytest.approx(closed_form(spec, "entropy"), abs=0.05)

    def test_ar1_lag_one_information(self):
        spec = GeneratorSpec(kind="ar1", n=4000, seed=10, phi=0.8)
        v = generate(spec).values
        mi = mutual_information_knn(v[1:], v[:-1], KnnConfig())
        assert mi == pytest.approx(closed_form(spec, "mi_lag1"), abs=0.06)

    def test_correlated_pair_information(self):
        spec = GeneratorSpec(kind="correlated_gaussian_pair", n=4000, seed=11, rho=0.9)
        x, y = generate(spec)
        mi = mutual_information_knn(x.values, y.values, KnnConfig())
        assert mi == pytest.approx(closed_form(spec, "mi_pair"), abs=0.06)
