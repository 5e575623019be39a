"""Tests for fininfo.io (ingestion, result tables) and fininfo.cli (subcommands, exit codes).

Two test groups:
  1. I/O: price/return loading with line-numbered errors, table formatting.
  2. CLI: each subcommand end to end through main(), exit codes, env overrides.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
from io import StringIO
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from fininfo.cli import main, run_subcommand
from fininfo.config import AnalysisConfig, RollingSpec
from fininfo.errors import EmptyInputError, IngestionError, UsageError
from fininfo.io import (
    format_record,
    format_table,
    load_prices,
    load_returns,
    load_series,
    write_table,
)
from fininfo.oracles import GeneratorSpec, generate, synthetic_index
from fininfo.rolling import rolling_kl, standardize_and_flag

# ── Helpers ──────────────────────────────────────────────────────────────────


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def _price_file(path: Path, n: int = 300, seed: int = 0) -> Path:
    rng = np.random.default_rng(seed)
    prices = 100.0 * np.exp(np.cumsum(0.01 * rng.standard_normal(n)))
    dates = synthetic_index(n).strftime("%Y-%m-%d")
    rows = "".join(f"{d},{p:.6f}\n" for d, p in zip(dates, prices, strict=True))
    return _write(path, "date,price\n" + rows)


def _run(capsys, *argv: str) -> tuple[int, str, str]:
    with pytest.raises(SystemExit) as exc:
        main(list(argv))
    out, err = capsys.readouterr()
    return exc.value.code, out, err


def _csv(text: str) -> pd.DataFrame:
    return pd.read_csv(StringIO(text))


# ── Group 1: Loading ─────────────────────────────────────────────────────────


class TestLoadPrices:
    def test_basic(self, tmp_path):
        f = _write(tmp_path / "p.csv", "date,price\n2020-01-02,100\n2020-01-03,101.5\n")
        p = load_prices(f)
        np.testing.assert_array_equal(p.prices, [100.0, 101.5])
        assert p.timestamps[0] == pd.Timestamp("2020-01-02")

    def test_negative_price_reports_line(self, tmp_path):
        f = _write(tmp_path / "p.csv", "date,price\n2020-01-02,100\n2020-01-03,-5\n")
        with pytest.raises(IngestionError, match="line 3") as exc:
            load_prices(f)
        assert exc.value.line == 3
        assert exc.value.exit_code == 4

    def test_zero_price_reported_in_file_order_after_sorting(self, tmp_path):
        f = _write(
            tmp_path / "p.csv",
            "date,price\n2020-01-06,0\n2020-01-02,100\n2020-01-03,-1\n",
        )
        with pytest.raises(IngestionError) as exc:
            load_prices(f)
        assert exc.value.line == 2

    def test_empty_file(self, tmp_path):
        with pytest.raises(EmptyInputError):
            load_prices(_write(tmp_path / "p.csv", ""))

    def test_header_only(self, tmp_path):
        with pytest.raises(EmptyInputError):
            load_prices(_write(tmp_path / "p.csv", "date,price\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError, match="no such file"):
            load_prices(tmp_path / "absent.csv")

    def test_duplicate_date(self, tmp_path):
        f = _write(tmp_path / "p.csv", "date,price\n2020-01-02,100\n2020-01-02,101\n")
        with pytest.raises(IngestionError, match="duplicate") as exc:
            load_prices(f)
        assert exc.value.line == 3

    @pytest.mark.parametrize(
        ("row", "fragment"), [("2020-13-45,100", "unparseable date"), ("2020-01-03,abc", "value")]
    )
    def test_unparseable_rows(self, tmp_path, row, fragment):
        f = _write(tmp_path / "p.csv", f"date,price\n2020-01-02,100\n{row}\n")
        with pytest.raises(IngestionError, match=fragment) as exc:
            load_prices(f)
        assert exc.value.line == 3

    def test_wrong_columns(self, tmp_path):
        f = _write(tmp_path / "p.csv", "day,close\n2020-01-02,100\n")
        with pytest.raises(IngestionError, match="expected columns"):
            load_prices(f)

    def test_unsorted_rows_sorted_with_warning(self, tmp_path, caplog):
        f = _write(tmp_path / "p.csv", "date,price\n2020-01-03,101\n2020-01-02,100\n")
        with caplog.at_level(logging.WARNING, logger="fininfo.io"):
            p = load_prices(f)
        np.testing.assert_array_equal(p.prices, [100.0, 101.0])
        assert "not time-sorted" in caplog.text

    def test_unsorted_rows_rejected_when_strict(self, tmp_path):
        f = _write(tmp_path / "p.csv", "date,price\n2020-01-03,101\n2020-01-02,100\n")
        with pytest.raises(IngestionError) as exc:
            load_prices(f, strict=True)
        assert exc.value.line == 3

    def test_json_records(self, tmp_path):
        records = [{"date": "2020-01-02", "price": 100.0}, {"date": "2020-01-03", "price": 99.0}]
        f = _write(tmp_path / "p.json", json.dumps(records))
        assert len(load_prices(f, "json")) == 2

    def test_json_reports_record_position(self, tmp_path):
        records = [{"date": "2020-01-02", "price": 100.0}, {"date": "2020-01-03", "price": -1}]
        f = _write(tmp_path / "p.json", json.dumps(records))
        with pytest.raises(IngestionError, match="record 2"):
            load_prices(f, "json")

    @pytest.mark.parametrize("text", ["{\"date\": 1}", "[1, 2", "[]"])
    def test_json_malformed(self, tmp_path, text):
        with pytest.raises(IngestionError):
            load_prices(_write(tmp_path / "p.json", text), "json")


class TestLoadReturns:
    def test_price_file_becomes_log_returns(self, tmp_path):
        text = "date,price\n2020-01-02,100\n2020-01-03,110\n2020-01-06,99\n"
        f = _write(tmp_path / "p.csv", text)
        r = load_returns(f)
        np.testing.assert_allclose(r.values, [math.log(1.1), math.log(0.9)])
        assert r.timestamps[0] == pd.Timestamp("2020-01-03")

    def test_value_file_read_directly(self, tmp_path):
        f = _write(tmp_path / "r.csv", "timestamp,value\n2020-01-02,0.01\n2020-01-03,-0.02\n")
        np.testing.assert_array_equal(load_returns(f).values, [0.01, -0.02])

    def test_negative_values_allowed_in_return_files(self, tmp_path):
        f = _write(tmp_path / "r.csv", "timestamp,return\n2020-01-02,-0.5\n")
        assert load_returns(f).values[0] == -0.5

    def test_column_selection(self, tmp_path):
        f = _write(tmp_path / "pair.csv", "timestamp,x,y\n2020-01-02,0.1,0.2\n2020-01-03,0.3,0.4\n")
        np.testing.assert_array_equal(load_returns(f, column="y").values, [0.2, 0.4])
        with pytest.raises(IngestionError):
            load_returns(f, column="z")


# ── Group 1b: Writing ────────────────────────────────────────────────────────


class TestFormatTable:
    def _series(self) -> pd.Series:
        return pd.Series([1 / 3, 2.0, float("nan")], index=synthetic_index(3), name="value")

    def test_csv_dates_and_precision(self):
        text = format_table(self._series())
        assert text.splitlines()[:3] == [
            "timestamp,value",
            "2000-01-03,0.333333333",
            "2000-01-04,2",
        ]

    def test_json_records(self):
        records = json.loads(format_table(self._series(), "json"))
        assert records[0] == {"timestamp": "2000-01-03", "value": 0.333333333}
        assert records[2]["value"] is None

    def test_json_flags_are_booleans(self):
        frame = pd.DataFrame({"value": [0.5], "flag": [np.True_]}, index=synthetic_index(1))
        assert json.loads(format_table(frame, "json"))[0]["flag"] is True

    def test_plot_data_is_long(self):
        frame = pd.DataFrame({"a": [1.0, 2.0], "b": [3.0, 4.0]}, index=synthetic_index(2))
        long = _csv(format_table(frame, plot_data=True))
        assert list(long.columns) == ["timestamp", "series", "value"]
        assert len(long) == 4
        assert set(long["series"]) == {"a", "b"}

    def test_written_table_reloads(self, tmp_path):
        frame = pd.DataFrame({"value": [0.25, 0.5], "signal": [1, -1]}, index=synthetic_index(2))
        path = tmp_path / "t.csv"
        write_table(frame, path)
        back = load_series(path)
        np.testing.assert_array_equal(back["signal"], [1, -1])
        assert back.index[1] == pd.Timestamp("2000-01-04")

    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_rolling_output_round_trips_at_nine_digits(self, tmp_path, fmt):
        r = generate(GeneratorSpec(kind="variance_switch", n=600, seed=3))
        regime = standardize_and_flag(rolling_kl(r, RollingSpec(window=60, stride=5)))
        frame = regime.to_frame()
        path = tmp_path / f"kl.{fmt}"
        write_table(frame, path, fmt)
        back = load_series(path, fmt)
        assert list(back.columns) == ["value", "z_score", "flag"]
        assert back.index.equals(pd.DatetimeIndex(frame.index, name="timestamp"))
        for column in ("value", "z_score"):
            np.testing.assert_allclose(back[column], frame[column], rtol=1e-8, atol=0)
        np.testing.assert_array_equal(back["flag"].astype(bool), frame["flag"])

    def test_record(self):
        assert format_record({"adjusted_var": 4.5, "multiplier": 4.5}) == (
            "adjusted_var,multiplier\n4.5,4.5\n"
        )
        assert json.loads(format_record({"n_trades": 3}, "json")) == {"n_trades": 3}


# ── Group 2: CLI ─────────────────────────────────────────────────────────────


class TestCliExitCodes:
    def test_unknown_subcommand(self, capsys):
        code, _, _ = _run(capsys, "bogus")
        assert code == 2

    def test_missing_subcommand(self, capsys):
        code, _, _ = _run(capsys)
        assert code == 2

    def test_missing_required_input(self, capsys):
        code, _, err = _run(capsys, "entropy")
        assert code == 2
        assert "[fininfo] UsageError" in err

    def test_invalid_parameter(self, tmp_path, capsys):
        code, _, err = _run(capsys, "entropy", "--prices", str(_price_file(tmp_path / "p.csv")),
                            "--window", "10")
        assert code == 3
        assert "ConfigError" in err

    def test_invalid_environment_value(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("FININFO_WINDOW", "abc")
        code, _, _ = _run(capsys, "entropy", "--prices", str(_price_file(tmp_path / "p.csv")))
        assert code == 3

    def test_unreadable_input(self, tmp_path, capsys):
        code, _, err = _run(capsys, "kl", "--prices", str(tmp_path / "absent.csv"))
        assert code == 4
        assert err.startswith("[fininfo] IngestionError")

    def test_series_too_short(self, tmp_path, capsys):
        code, out, err = _run(capsys, "kl", "--prices", str(_price_file(tmp_path / "p.csv", n=100)))
        assert code == 5
        assert out == ""
        assert "InsufficientDataError" in err

    def test_run_subcommand_rejects_unknown_name(self):
        with pytest.raises(UsageError):
            run_subcommand("bogus", AnalysisConfig(), argparse.Namespace())


class TestCliSubcommands:
    def test_var_scalar(self, capsys):
        code, out, _ = _run(capsys, "var", "--kl", "0.91", "--mu", "0.28", "--sigma", "0.18")
        assert code == 0
        assert out == "adjusted_var,multiplier\n4.5,4.5\n"

    def test_var_needs_inputs(self, capsys):
        code, _, _ = _run(capsys, "var", "--kl", "0.91")
        assert code == 2

    def test_var_series(self, tmp_path, capsys):
        prices = str(_price_file(tmp_path / "p.csv", n=301))
        code, out, _ = _run(capsys, "var", "--prices", prices, "--window", "60", "--base-var", "2")
        assert code == 0
        table = _csv(out)
        assert list(table.columns) == [
            "timestamp", "kl", "z_score", "flag", "multiplier", "adjusted_var",
        ]
        assert len(table) == 300 - 120 + 1
        assert (table["adjusted_var"] >= 2).all()

    def test_synth_is_reproducible(self, capsys):
        args = ("synth", "--kind", "ar1", "--phi", "0.5", "--n", "50", "--seed", "3")
        _, first, _ = _run(capsys, *args)
        _, second, _ = _run(capsys, *args)
        assert first == second
        table = _csv(first)
        assert list(table.columns) == ["timestamp", "value"]
        assert len(table) == 50

    def test_synth_pair_columns(self, capsys):
        _, out, _ = _run(capsys, "synth", "--kind", "coupled_lag_pair", "--n", "20")
        assert list(_csv(out).columns) == ["timestamp", "x", "y"]

    def test_entropy_window_from_env_then_flag(self, tmp_path, capsys, monkeypatch):
        prices = str(_price_file(tmp_path / "p.csv", n=301))
        monkeypatch.setenv("FININFO_WINDOW", "60")
        _, out, _ = _run(capsys, "entropy", "--prices", prices, "--stride", "10")
        assert len(_csv(out)) == (300 - 60) // 10 + 1
        _, out, _ = _run(capsys, "entropy", "--prices", prices, "--stride", "10",
                         "--window", "100")
        assert len(_csv(out)) == (300 - 100) // 10 + 1

    def test_kl_repeat_runs_byte_identical(self, tmp_path, capsys):
        prices = str(_price_file(tmp_path / "p.csv", n=400))
        args = ("kl", "--prices", prices, "--window", "60", "--workers", "2")
        _, first, _ = _run(capsys, *args)
        _, second, _ = _run(capsys, *args)
        assert first == second
        assert first.splitlines()[0] == "timestamp,value,z_score,flag"

    def test_kl_json_with_supplied_baseline(self, tmp_path, capsys):
        prices = str(_price_file(tmp_path / "p.csv", n=200))
        code, out, _ = _run(capsys, "kl", "--prices", prices, "--window", "50", "--mu", "0.2",
                            "--sigma", "0.1", "--non-overlapping", "--format", "json")
        assert code == 0
        records = json.loads(out)
        assert len(records) == (199 - 100) // 50 + 1
        first = records[0]
        assert set(first) == {"timestamp", "value", "z_score", "flag"}
        assert first["z_score"] == pytest.approx((first["value"] - 0.2) / 0.1, abs=1e-6)

    def test_nmi_plot_data_to_file(self, tmp_path, capsys):
        prices = str(_price_file(tmp_path / "p.csv", n=200))
        target = tmp_path / "nmi.csv"
        code, out, _ = _run(capsys, "nmi", "--prices", prices, "--window", "60", "--stride", "20",
                            "--plot-data", "-o", str(target))
        assert code == 0
        assert out == ""
        table = pd.read_csv(target)
        assert list(table.columns) == ["timestamp", "series", "value"]
        assert table["value"].between(0, 1).all()

    def test_te_from_synthetic_pair(self, tmp_path, capsys):
        pair = tmp_path / "pair.csv"
        _run(capsys, "synth", "--kind", "coupled_lag_pair", "--n", "400", "--coupling", "0.8",
             "-o", str(pair))
        code, out, _ = _run(
            capsys, "te", "--source", str(pair), "--source-column", "x",
            "--target", str(pair), "--target-column", "y",
            "--window", "150", "--stride", "50", "--both",
        )
        assert code == 0
        table = _csv(out)
        assert list(table.columns) == ["timestamp", "value", "reverse"]
        assert len(table) == (398 - 150) // 50 + 1
        assert table["value"].median() > table["reverse"].median()

    def test_te_needs_both_files(self, capsys):
        code, _, _ = _run(capsys, "te", "--source", "x.csv")
        assert code == 2

    def test_diversify_two_assets(self, tmp_path, capsys):
        a = str(_price_file(tmp_path / "a.csv", n=200, seed=1))
        b = str(_price_file(tmp_path / "b.csv", n=200, seed=2))
        code, out, _ = _run(capsys, "diversify", "--asset", a, "--asset", b, "--budget", "6",
                            "--sense", "maximize")
        assert code == 0
        record = _csv(out).iloc[0]
        assert set(record.index) == {"objective", "evaluations", "weight_a", "weight_b"}
        assert record["evaluations"] <= 6
        assert record["weight_a"] + record["weight_b"] == pytest.approx(1.0, abs=1e-6)

    def test_diversify_same_stem_keeps_both_weights(self, tmp_path, capsys):
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        a = str(_price_file(tmp_path / "a" / "p.csv", n=200, seed=1))
        b = str(_price_file(tmp_path / "b" / "p.csv", n=200, seed=2))
        code, out, _ = _run(capsys, "diversify", "--asset", a, "--asset", b, "--budget", "4")
        assert code == 0
        record = _csv(out).iloc[0]
        assert {"weight_a/p", "weight_b/p"} <= set(record.index)
        assert record["weight_a/p"] + record["weight_b/p"] == pytest.approx(1.0, abs=1e-6)

    def test_diversify_rejects_repeated_file(self, tmp_path, capsys):
        a = str(_price_file(tmp_path / "a.csv", n=200, seed=1))
        code, _, err = _run(capsys, "diversify", "--asset", a, "--asset", a)
        assert code == 2
        assert "more than once" in err

    def test_diversify_rejects_negative_initial_weights(self, tmp_path, capsys):
        a = str(_price_file(tmp_path / "a.csv", n=200, seed=1))
        b = str(_price_file(tmp_path / "b.csv", n=200, seed=2))
        code, _, err = _run(capsys, "diversify", "--asset", a, "--asset", b,
                            "--initial", "1.5", "-0.5")
        assert code == 3
        assert "non-negative" in err

    def test_diversify_needs_two_assets(self, tmp_path, capsys):
        code, _, _ = _run(capsys, "diversify", "--asset", str(_price_file(tmp_path / "a.csv")))
        assert code == 2

    def test_signals_then_backtest(self, tmp_path, capsys):
        prices = str(_price_file(tmp_path / "p.csv", n=200, seed=4))
        signals = tmp_path / "signals.csv"
        code, _, _ = _run(capsys, "signals", "--prices", prices, "--window", "60",
                          "-o", str(signals))
        assert code == 0
        table = pd.read_csv(signals)
        assert list(table.columns) == ["timestamp", "value", "signal"]
        assert set(table["signal"]) <= {-1, 0, 1}

        code, out, _ = _run(capsys, "backtest", "--prices", prices, "--signals", str(signals))
        assert code == 0
        summary = _csv(out).iloc[0]
        assert list(summary.index) == ["total_log_return", "hit_rate", "exposure", "n_trades"]
        assert 0.0 <= summary["exposure"] <= 1.0

        code, out, _ = _run(capsys, "backtest", "--prices", prices, "--signals", str(signals),
                            "--pnl")
        assert code == 0
        assert len(_csv(out)) == len(table) - 1

    def test_backtest_rejects_table_without_signals(self, tmp_path, capsys):
        prices = str(_price_file(tmp_path / "p.csv", n=50))
        other = _write(tmp_path / "o.csv", "timestamp,value\n2000-01-04,0.1\n")
        code, _, _ = _run(capsys, "backtest", "--prices", prices, "--signals", str(other))
        assert code == 2

    def test_verbose_logs_to_stderr(self, tmp_path, capsys):
        prices = str(_price_file(tmp_path / "p.csv", n=200))
        _, _, err = _run(capsys, "nmi", "--prices", prices, "--window", "60", "--stride", "20",
                         "-v")
        assert "[fininfo] INFO fininfo.cli: NMI below" in err
