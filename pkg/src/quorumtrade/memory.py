"""Append-only trade memory with retrospective, leakage-safe backfill.

Every executed trade is journaled with its horizon outcome fields left empty.
Only once the bank clock reaches ``trade date + horizon`` does backfill compute
the realized return, the horizon Sharpe, and their rolling trend slopes, and
write them into the record. Filled values are immutable afterwards: advancing
the clock can only add information, never change it.

Short- and long-horizon reflection agents read the same bank through a shared
prompt builder that differs only in which horizons it reports.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

ANNUALIZATION_DAYS = 252
SHARPE_MIN_RETURNS = 3


class MemoryBankError(Exception):
    pass


class OrderingError(MemoryBankError):
    """Record dates must be strictly increasing."""


class LeakageProtocolError(MemoryBankError):
    """Horizon outcome fields must be empty at append time."""


class EmptyBankError(MemoryBankError):
    pass


@dataclass
class TradeRecord:
    """One executed (or held) trade plus retrospectively filled outcomes.

    ``shares_changed`` is signed (+bought / -sold); ``direction`` is +1 buy,
    -1 sell, 0 hold. Horizon dicts are keyed by day count; a missing key means
    "not yet evaluated" while an explicit None in ``sharpes`` marks a computed
    but undefined value (zero dispersion or too few returns).
    """

    date: date
    action: str
    trade_pct: int
    shares_changed: int
    entry_price: float
    pre_trade_value: float
    direction: int
    returns_pct: dict[int, float] = field(default_factory=dict)
    sharpes: dict[int, float | None] = field(default_factory=dict)
    return_slopes: dict[int, float] = field(default_factory=dict)
    sharpe_slopes: dict[int, float] = field(default_factory=dict)
    reflection_ids: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "kind": "trade",
            "date": self.date.isoformat(),
            "action": self.action,
            "trade_pct": self.trade_pct,
            "shares_changed": self.shares_changed,
            "entry_price": self.entry_price,
            "pre_trade_value": self.pre_trade_value,
            "direction": self.direction,
            "returns_pct": {str(k): v for k, v in self.returns_pct.items()},
            "sharpes": {str(k): v for k, v in self.sharpes.items()},
            "return_slopes": {str(k): v for k, v in self.return_slopes.items()},
            "sharpe_slopes": {str(k): v for k, v in self.sharpe_slopes.items()},
            "reflection_ids": list(self.reflection_ids),
            "flags": list(self.flags),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "TradeRecord":
        return cls(
            date=date.fromisoformat(rec["date"]),
            action=rec["action"],
            trade_pct=rec["trade_pct"],
            shares_changed=rec["shares_changed"],
            entry_price=rec["entry_price"],
            pre_trade_value=rec["pre_trade_value"],
            direction=rec["direction"],
            returns_pct={int(k): v for k, v in rec["returns_pct"].items()},
            sharpes={int(k): v for k, v in rec["sharpes"].items()},
            return_slopes={int(k): v for k, v in rec["return_slopes"].items()},
            sharpe_slopes={int(k): v for k, v in rec["sharpe_slopes"].items()},
            reflection_ids=list(rec["reflection_ids"]),
            flags=list(rec["flags"]),
        )


@dataclass(frozen=True)
class ReflectionConfig:
    name: str
    horizons: tuple[int, ...]
    window: int = 5  # trades per slope window
    role: str = "trader"


SHORT_REFLECTION = ReflectionConfig("short", (1, 7, 14))
LONG_REFLECTION = ReflectionConfig("long", (28, 90, 180, 360))


@dataclass(frozen=True)
class Reflection:
    reflection_id: str
    date: date
    config_name: str
    role: str
    text: str
    source: str
    digest: dict

    def to_record(self) -> dict:
        return {
            "kind": "reflection",
            "reflection_id": self.reflection_id,
            "date": self.date.isoformat(),
            "config_name": self.config_name,
            "role": self.role,
            "text": self.text,
            "source": self.source,
            "digest": self.digest,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Reflection":
        return cls(
            reflection_id=rec["reflection_id"],
            date=date.fromisoformat(rec["date"]),
            config_name=rec["config_name"],
            role=rec["role"],
            text=rec["text"],
            source=rec["source"],
            digest=rec["digest"],
        )


def least_squares_slope(values: list[float]) -> float:
    """Slope of values against their index, by the closed-form normal equation."""
    n = len(values)
    if n < 2:
        raise ValueError("slope needs at least 2 values")
    xbar = (n - 1) / 2.0
    ybar = sum(values) / n
    num = sum((i - xbar) * (y - ybar) for i, y in enumerate(values))
    den = sum((i - xbar) ** 2 for i in range(n))
    return num / den


class MemoryBank:
    """Single-writer journal of trade records plus attached reflections.

    The optional snapshot path makes the bank interruption safe: every append,
    backfill, and stored reflection rewrites the snapshot file.
    """

    SNAPSHOT_SCHEMA = "trade-memory-bank"
    SNAPSHOT_VERSION = 1

    def __init__(
        self,
        ticker: str,
        horizons: tuple[int, ...] = (1, 7, 14, 28, 90, 180, 360),
        snapshot_path: str | Path | None = None,
        slope_window: int = 5,
        sharpe_window_mode: str = "eval",
    ):
        if sharpe_window_mode not in ("eval", "trade"):
            raise ValueError("sharpe_window_mode must be 'eval' or 'trade'")
        self.ticker = ticker
        self.horizons = tuple(horizons)
        self.records: list[TradeRecord] = []
        self.reflections: list[Reflection] = []
        self.clock: date | None = None
        self.snapshot_path = Path(snapshot_path) if snapshot_path else None
        self.slope_window = slope_window
        self.sharpe_window_mode = sharpe_window_mode

    def __len__(self) -> int:
        return len(self.records)

    # -- journal -----------------------------------------------------------

    def append_trade(self, record: TradeRecord) -> None:
        if self.records and record.date <= self.records[-1].date:
            raise OrderingError(
                f"record date {record.date} not after last {self.records[-1].date}"
            )
        if record.returns_pct or record.sharpes or record.return_slopes or record.sharpe_slopes:
            raise LeakageProtocolError(
                f"record {record.date} arrived with pre-filled horizon outcomes"
            )
        self.records.append(record)
        self.clock = record.date if self.clock is None else max(self.clock, record.date)
        self._snapshot()

    def backfill(
        self,
        now: date,
        price_lookup: Callable[[date], float | None],
        daily_returns: Callable[[date], float | None],
    ) -> int:
        """Fill realized outcomes for every (record, horizon) that has matured.

        A horizon h of record t matures when ``t.date + h <= now``. Fills are
        write-once; rerunning with the same clock is a no-op. Returns the
        number of fields written (returns, sharpes, and slopes all count).
        """
        self.clock = now if self.clock is None else max(self.clock, now)
        filled = 0
        for idx, rec in enumerate(self.records):
            for h in self.horizons:
                if rec.date + timedelta(days=h) > now:
                    continue
                if h not in rec.returns_pct:
                    if self._fill_return(idx, rec, h, price_lookup):
                        filled += 1
                        filled += self._fill_slope(idx, h, kind="return")
                if h >= 7 and h not in rec.sharpes:
                    rec.sharpes[h] = self._horizon_sharpe(rec, h, daily_returns)
                    filled += 1
                    if rec.sharpes[h] is not None:
                        filled += self._fill_slope(idx, h, kind="sharpe")
        if filled:
            self._snapshot()
        return filled

    def _fill_return(
        self,
        idx: int,
        rec: TradeRecord,
        h: int,
        price_lookup: Callable[[date], float | None],
    ) -> bool:
        if rec.direction == 0:
            rec.returns_pct[h] = 0.0
            return True
        future = rec.date + timedelta(days=h)
        price = price_lookup(future)
        if price is None:
            logger.info("%s: no price at %s for record %d h=%d; left absent",
                        self.ticker, future, idx, h)
            return False
        pnl = (price - rec.entry_price) * rec.direction * abs(rec.shares_changed)
        rec.returns_pct[h] = 100.0 * pnl / rec.pre_trade_value
        return True

    def _horizon_sharpe(
        self, rec: TradeRecord, h: int, daily_returns: Callable[[date], float | None]
    ) -> float | None:
        """Annualized Sharpe over the h daily portfolio returns in the window.

        Default window ends at the evaluation date (trade date + h); the
        'trade' mode instead trails the trade date itself. The std uses the
        1/n population normalization. Returns None when fewer than
        SHARPE_MIN_RETURNS returns exist or dispersion is zero.
        """
        end = rec.date + timedelta(days=h) if self.sharpe_window_mode == "eval" else rec.date
        rets = []
        for offset in range(1, h + 1):
            r = daily_returns(end - timedelta(days=h) + timedelta(days=offset))
            if r is not None:
                rets.append(r)
        if len(rets) < SHARPE_MIN_RETURNS:
            logger.info("%s: only %d returns in %d-day window for %s; sharpe undefined",
                        self.ticker, len(rets), h, rec.date)
            return None
        mu = float(np.mean(rets))
        sigma = float(np.std(rets))  # population, 1/n
        if sigma == 0.0:
            return None
        return math.sqrt(ANNUALIZATION_DAYS) * mu / sigma

    def _fill_slope(self, idx: int, h: int, kind: str) -> int:
        rec = self.records[idx]
        if kind == "return":
            vals = [r.returns_pct[h] for r in self.records[: idx + 1] if h in r.returns_pct]
            target = rec.return_slopes
        else:
            vals = [
                r.sharpes[h]
                for r in self.records[: idx + 1]
                if h in r.sharpes and r.sharpes[h] is not None
            ]
            target = rec.sharpe_slopes
        if len(vals) < self.slope_window or h in target:
            return 0
        target[h] = least_squares_slope(vals[-self.slope_window:])
        return 1

    def rolling_slopes(self, h: int, w: int | None = None) -> list[float | None]:
        """Per-record rolling least-squares slope of realized returns at ``h``.

        A record gets a slope only when it is itself backfilled at h and at
        least w backfilled values (its own included) exist up to that record.
        """
        w = w or self.slope_window
        if w < 2:
            raise ValueError("slope window must be >= 2")
        out: list[float | None] = []
        for idx, rec in enumerate(self.records):
            if h not in rec.returns_pct:
                out.append(None)
                continue
            vals = [r.returns_pct[h] for r in self.records[: idx + 1] if h in r.returns_pct]
            out.append(least_squares_slope(vals[-w:]) if len(vals) >= w else None)
        return out

    # -- reflection --------------------------------------------------------

    def horizon_digest(self, config: ReflectionConfig) -> dict:
        """Per-horizon performance summary used by prompts and reflections."""
        digest: dict = {}
        for h in config.horizons:
            rets = [r.returns_pct[h] for r in self.records if h in r.returns_pct]
            srs = [
                r.sharpes[h]
                for r in self.records
                if h in r.sharpes and r.sharpes[h] is not None
            ]
            r_slopes = [r.return_slopes[h] for r in self.records if h in r.return_slopes]
            s_slopes = [r.sharpe_slopes[h] for r in self.records if h in r.sharpe_slopes]
            digest[str(h)] = {
                "filled": len(rets),
                "mean_return": float(np.mean(rets)) if rets else None,
                "latest_return": rets[-1] if rets else None,
                "mean_sharpe": float(np.mean(srs)) if srs else None,
                "latest_sharpe": srs[-1] if srs else None,
                "latest_return_slope": r_slopes[-1] if r_slopes else None,
                "latest_sharpe_slope": s_slopes[-1] if s_slopes else None,
            }
        return digest

    @staticmethod
    def _fmt(value: float | None, suffix: str = "") -> str:
        return "n/a" if value is None else f"{value:+.4f}{suffix}"

    @staticmethod
    def _tag(slope: float | None) -> str:
        if slope is None:
            return "n/a"
        word = "improving" if slope > 0 else "deteriorating" if slope < 0 else "flat"
        return f"{slope:+.4f} ({word})"

    def reflection_prompt(self, config: ReflectionConfig) -> str:
        """Deterministic prompt: overview, per-horizon digests, instructions."""
        if not self.records:
            raise EmptyBankError("cannot build a reflection prompt from an empty bank")
        actions = {"BUY": 0, "SELL": 0, "HOLD": 0}
        for r in self.records:
            actions[r.action] = actions.get(r.action, 0) + 1
        lines = [
            "=== trading memory overview ===",
            f"ticker: {self.ticker} | records: {len(self.records)} | "
            f"span: {self.records[0].date.isoformat()} -> {self.records[-1].date.isoformat()}",
            f"actions: BUY {actions['BUY']} / SELL {actions['SELL']} / HOLD {actions['HOLD']}",
            "",
            "=== horizon performance ===",
        ]
        digest = self.horizon_digest(config)
        for h in config.horizons:
            d = digest[str(h)]
            if d["filled"] == 0:
                lines.append(f"[{h}d] no realized outcomes yet")
                continue
            lines.append(
                f"[{h}d] filled: {d['filled']}/{len(self.records)}"
                f" | mean R: {self._fmt(d['mean_return'], '%')}"
                f" | latest R: {self._fmt(d['latest_return'], '%')}"
                f" | mean SR: {self._fmt(d['mean_sharpe'])}"
                f" | R-slope: {self._tag(d['latest_return_slope'])}"
                f" | SR-slope: {self._tag(d['latest_sharpe_slope'])}"
            )
        lines += [
            "",
            "=== reflection instructions ===",
            "Judge whether recent performance is improving or deteriorating at each",
            "horizon above, citing the slope signs. State one concrete adjustment to",
            "confidence, risk posture, or position sizing for the next decision.",
        ]
        return "\n".join(lines) + "\n"

    def add_reflection(self, reflection: Reflection) -> None:
        self.reflections.append(reflection)
        if self.records:
            self.records[-1].reflection_ids.append(reflection.reflection_id)
        self._snapshot()

    def latest_reflection(self, config_name: str, role: str | None = None) -> Reflection | None:
        for refl in reversed(self.reflections):
            if refl.config_name == config_name and (role is None or refl.role == role):
                return refl
        return None

    # -- persistence -------------------------------------------------------

    def _snapshot(self) -> None:
        if self.snapshot_path is not None:
            self.save_snapshot(self.snapshot_path)

    def save_snapshot(self, path: str | Path) -> None:
        """Newline-delimited records with a versioned header, written atomically."""
        path = Path(path)
        header = {
            "schema": self.SNAPSHOT_SCHEMA,
            "version": self.SNAPSHOT_VERSION,
            "ticker": self.ticker,
            "horizons": list(self.horizons),
            "clock": self.clock.isoformat() if self.clock else None,
            "slope_window": self.slope_window,
            "sharpe_window_mode": self.sharpe_window_mode,
        }
        lines = [json.dumps(header, sort_keys=True)]
        lines += [json.dumps(r.to_record(), sort_keys=True) for r in self.records]
        lines += [json.dumps(r.to_record(), sort_keys=True) for r in self.reflections]
        tmp = path.with_suffix(path.suffix + ".tmp")
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_text("\n".join(lines) + "\n")
        tmp.replace(path)

    @classmethod
    def load_snapshot(cls, path: str | Path) -> "MemoryBank":
        path = Path(path)
        lines = path.read_text().splitlines()
        if not lines:
            raise MemoryBankError(f"{path}: empty snapshot")
        header = json.loads(lines[0])
        if header.get("schema") != cls.SNAPSHOT_SCHEMA:
            raise MemoryBankError(f"{path}: unexpected schema {header.get('schema')!r}")
        bank = cls(
            ticker=header["ticker"],
            horizons=tuple(header["horizons"]),
            slope_window=header.get("slope_window", 5),
            sharpe_window_mode=header.get("sharpe_window_mode", "eval"),
        )
        for line in lines[1:]:
            rec = json.loads(line)
            if rec["kind"] == "trade":
                bank.records.append(TradeRecord.from_record(rec))
            elif rec["kind"] == "reflection":
                bank.reflections.append(Reflection.from_record(rec))
        bank.clock = date.fromisoformat(header["clock"]) if header.get("clock") else None
        return bank


def reflect(bank: MemoryBank, config: ReflectionConfig, provider) -> Reflection | None:
    """Generate, store, and return one reflection from the bank's live state.

    The attached digest always comes from the bank itself, not from the
    provider text, so it is exact regardless of how the provider summarizes.
    Provider failures skip the reflection (logged); the caller proceeds.
    """
    from .providers import ProviderRequest

    prompt = bank.reflection_prompt(config)
    request = ProviderRequest(
        system=f"You are the {config.name}-horizon reflection agent for {config.role}.",
        user=prompt,
    )
    try:
        text = provider.complete(request)
    except Exception as exc:  # noqa: BLE001 - provider boundary
        logger.warning("reflection provider failed (%s); skipping this cycle", exc)
        return None
    reflection = Reflection(
        reflection_id=f"{config.name}-{bank.clock.isoformat()}-{len(bank.reflections) + 1:04d}",
        date=bank.clock,
        config_name=config.name,
        role=config.role,
        text=text,
        source=provider.spec.provider_id,
        digest=bank.horizon_digest(config),
    )
    bank.add_reflection(reflection)
    return reflection

