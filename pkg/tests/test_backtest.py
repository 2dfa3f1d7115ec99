from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quorumtrade.backtest import BacktestConfig, Portfolio, execute, run_backtest
from quorumtrade.baselines import (
    BaselineStrategy,
    baseline_signal,
    macd_series,
    rsi_series,
    sma_series,
)
from quorumtrade.orchestration import TradeDecision
from quorumtrade.utils import stable_rng

from conftest import series_from_closes

DAY = date(2024, 3, 1)


def decision(action, pct):
    return TradeDecision(action=action, trade_pct=pct if action != "HOLD" else 0,
                         confidence=50.0, rationale="test")


class TestExecute:
    def test_buy_half(self):
        p, rec = execute(decision("BUY", 50), Portfolio(cash=1000.0), 100.0, DAY)
        assert (p.cash, p.shares) == (500.0, 5)
        assert rec.shares_changed == 5 and rec.direction == 1
        assert rec.pre_trade_value == 1000.0

    def test_sell_quarter_floors(self):
        p, rec = execute(
            decision("SELL", 25), Portfolio(cash=0.0, shares=10, last_mark=100.0), 100.0, DAY
        )
        assert rec.shares_changed == -2  # floor(2.5)
        assert p.shares == 8
        assert p.cash == 200.0

    def test_hold_identity(self):
        before = Portfolio(cash=123.0, shares=4, last_mark=90.0)
        p, rec = execute(decision("HOLD", 0), before, 95.0, DAY)
        assert (p.cash, p.shares) == (before.cash, before.shares)
        assert rec.direction == 0 and rec.shares_changed == 0

    def test_buy_without_cash_degrades(self):
        p, rec = execute(decision("BUY", 50), Portfolio(cash=150.0), 100.0, DAY)
        # 50% of 150 cannot buy one share at 100
        assert rec.action == "HOLD" and rec.direction == 0
        assert any("degraded" in f for f in rec.flags)
        assert p.cash == 150.0

    def test_sell_without_shares_degrades(self):
        p, rec = execute(decision("SELL", 100), Portfolio(cash=10.0), 100.0, DAY)
        assert rec.action == "HOLD"
        assert any("degraded" in f for f in rec.flags)

    def test_value_conserved_at_execution_price(self):
        port = Portfolio(cash=997.13, shares=7, last_mark=140.0)
        price = 141.77
        for act, pct in (("BUY", 75), ("SELL", 50), ("HOLD", 0)):
            after, _ = execute(decision(act, pct), port, price, DAY)
            assert after.marked(price) == pytest.approx(port.marked(price), rel=1e-12)

    def test_nonpositive_price_rejected(self):
        with pytest.raises(ValueError):
            execute(decision("BUY", 50), Portfolio(cash=100.0), 0.0, DAY)

    @given(
        st.lists(
            st.tuples(
                st.sampled_from(["BUY", "SELL", "HOLD"]),
                st.sampled_from([0, 25, 50, 75, 100]),
                st.floats(min_value=1.0, max_value=500.0),
            ),
            min_size=1,
            max_size=50,
        )
    )
    @settings(max_examples=80, deadline=None)
    def test_inventory_never_negative(self, stream):
        port = Portfolio(cash=10_000.0)
        for act, pct, price in stream:
            if act == "HOLD":
                pct = 0
            port, _ = execute(decision(act, pct), port, price, DAY)
            assert port.cash >= 0
            assert port.shares >= 0


class AlwaysHold:
    name = "always-hold"

    def decide(self, series, portfolio):
        return decision("HOLD", 0)


class TestRunBacktest:
    def make_series(self, n=80, drift=0.002):
        rng = stable_rng("bt-series")
        closes = 100.0 * np.exp(np.cumsum(rng.normal(drift, 0.01, size=n)))
        return series_from_closes(list(closes), start=date(2024, 1, 1))

    def test_buy_and_hold_tracks_asset(self):
        series = self.make_series()
        config = BacktestConfig(initial_cash=10_000.0, ticker="TEST")
        result = run_backtest(BaselineStrategy("buy-and-hold"), series, config)
        closes = series.closes
        asset_cr = (closes[-1] - closes[0]) / closes[0] * 100.0
        bound = 100.0 * closes[0] / config.initial_cash  # one share of slack
        assert abs(result.metrics.cum_return_pct - asset_cr) <= bound

    def test_always_hold_flat(self):
        series = self.make_series()
        result = run_backtest(AlwaysHold(), series, BacktestConfig(initial_cash=5_000.0))
        assert all(v == 5_000.0 for v in result.values)
        assert result.metrics.max_drawdown_pct == 0.0

    def test_value_series_spans_trading_days(self):
        series = self.make_series(n=30)
        result = run_backtest(AlwaysHold(), series, BacktestConfig())
        assert len(result.values) == len(series)
        assert result.dates == [b.date for b in series.bars]

    def test_deterministic_double_run(self):
        series = self.make_series()
        r1 = run_backtest(BaselineStrategy("sma"), series, BacktestConfig())
        r2 = run_backtest(BaselineStrategy("sma"), series, BacktestConfig())
        assert r1.trade_log_lines() == r2.trade_log_lines()
        assert r1.values == r2.values

    def test_failing_strategy_records_flagged_hold(self):
        class Boom:
            name = "boom"

            def decide(self, series, portfolio):
                raise RuntimeError("nope")

        series = self.make_series(n=10)
        result = run_backtest(Boom(), series, BacktestConfig())
        assert all(d.error_flag for d in result.decisions)
        assert all(r.action == "HOLD" for r in result.records)

    def test_full_allocation_override(self):
        class SmallBuyer:
            name = "small"

            def __init__(self):
                self.done = False

            def decide(self, series, portfolio):
                if not self.done:
                    self.done = True
                    return decision("BUY", 25)
                return decision("HOLD", 0)

        series = self.make_series(n=10)
        result = run_backtest(SmallBuyer(), series, BacktestConfig(allocation="full"))
        assert result.records[0].trade_pct == 100


class TestBaselines:
    def test_macd_constant_series_never_signals(self):
        series = series_from_closes([100.0] * 80)
        state = {"shares": 0}
        for i in range(40, 80):
            visible = series_from_closes([100.0] * i)
            dec = baseline_signal("macd", visible, state)
            assert dec.action == "HOLD"

    def test_macd_zero_on_constant(self):
        macd, signal = macd_series([100.0] * 60)
        assert all(m == 0.0 for m in macd)
        assert all(s == 0.0 for s in signal)

    def test_sma_crossover_index_matches_oracle(self):
        # flat then a step up; the 10-day mean must cross the 30-day mean once
        closes = [100.0] * 40 + [110.0] * 20
        series = series_from_closes(closes)

        def oracle_cross_index():
            s10 = sma_series(closes, 10)
            s30 = sma_series(closes, 30)
            for i in range(1, len(closes)):
                if None in (s10[i], s30[i], s10[i - 1], s30[i - 1]):
                    continue
                if s10[i] > s30[i] and s10[i - 1] <= s30[i - 1]:
                    return i
            return None

        expected = oracle_cross_index()
        assert expected is not None

        state = {"shares": 0}
        fired = []
        for i in range(31, len(closes) + 1):
            visible = series_from_closes(closes[:i])
            dec = baseline_signal("sma", visible, state)
            if dec.action == "BUY":
                fired.append(i - 1)
        assert fired == [expected]

    def test_rsi_100_on_monotone_up(self):
        closes = [float(x) for x in range(100, 120)]  # 20 bars, never a down day
        rsi = rsi_series(closes, 14)
        assert rsi[-1] == 100.0

    def test_kdj_rsi_sells_overbought(self):
        closes = [float(x) for x in range(100, 120)]
        dec = baseline_signal("kdj-rsi", series_from_closes(closes), {"shares": 5})
        assert dec.action == "SELL"

    def test_kdj_rsi_buys_oversold(self):
        closes = [float(x) for x in range(120, 100, -1)]
        dec = baseline_signal("kdj-rsi", series_from_closes(closes), {"shares": 0})
        assert dec.action == "BUY"

    def test_zmr_entry_and_exit(self):
        # stable around 100 then a sharp dip: z <= -2 triggers entry
        closes = [100.0, 101.0, 99.5, 100.5, 100.0] * 4 + [90.0]
        dec = baseline_signal("zmr", series_from_closes(closes), {"shares": 0})
        assert dec.action == "BUY"
        # after reversion to the mean with a position: exit
        recovered = closes + [100.0, 101.0, 102.0, 103.0, 104.0]
        dec2 = baseline_signal("zmr", series_from_closes(recovered), {"shares": 10})
        assert dec2.action == "SELL"

    def test_buy_and_hold_buys_once(self):
        state = {"shares": 0}
        series = series_from_closes([100.0] * 10)
        first = baseline_signal("buy-and-hold", series, state)
        second = baseline_signal("buy-and-hold", series, state)
        assert first.action == "BUY" and first.trade_pct == 100
        assert second.action == "HOLD"

    def test_unknown_baseline_rejected(self):
        with pytest.raises(ValueError):
            baseline_signal("momo", series_from_closes([100.0] * 10), {})

    def test_insufficient_history_holds(self):
        short = series_from_closes([100.0] * 5)
        for name in ("macd", "kdj-rsi", "zmr", "sma"):
            assert baseline_signal(name, short, {"shares": 0}).action == "HOLD"
