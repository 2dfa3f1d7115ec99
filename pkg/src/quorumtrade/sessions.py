"""Human-session record schemas and their validators.

Three record kinds exist, each stored under ``sessions/{user}/{ticker}/{kind}``:

* ``session-export``: the full stage-by-stage decision trace
* ``portfolio-state``: the participant's current cash/position
* ``progress-marker``: where to resume (day index + stage)

A trading day decomposes into the ordered stages d0..d4 then final; stages may
only ever appear as an in-order prefix of that sequence, entries for d1-d4
carry the participant's leakage flag, and the final stage carries attribution
plus a trade size from the fixed grid. A day is locked once its final stage is
present: only the last day of a session may be incomplete.
"""

from __future__ import annotations

from dataclasses import dataclass

STAGES = ("d0", "d1", "d2", "d3", "d4", "final")
LEAKAGE_STAGES = ("d1", "d2", "d3", "d4")
TRADE_SIZES = (25, 50, 75, 100)
ACTIONS = ("BUY", "SELL", "HOLD")
KINDS = ("session-export", "portfolio-state", "progress-marker")


class SchemaError(Exception):
    """Validation failure carrying the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


@dataclass(frozen=True)
class SessionKey:
    user_id: str
    ticker: str
    kind: str

    def __post_init__(self):
        for name, value in (("user_id", self.user_id), ("ticker", self.ticker)):
            if not value or "/" in value or value in (".", ".."):
                raise ValueError(f"invalid {name}: {value!r}")
        if self.kind not in KINDS:
            raise ValueError(f"invalid kind {self.kind!r}; expected one of {KINDS}")

    def storage_path(self) -> str:
        return f"sessions/{self.user_id}/{self.ticker}/{self.kind}"


def _require(body: dict, key: str, types, path: str):
    if key not in body:
        raise SchemaError(f"{path}.{key}", "missing required field")
    if not isinstance(body[key], types):
        raise SchemaError(
            f"{path}.{key}",
            f"expected {getattr(types, '__name__', types)}, got {type(body[key]).__name__}",
        )
    return body[key]


def _validate_stage_entry(entry: dict, path: str, is_final: bool) -> None:
    action = _require(entry, "action", str, path)
    if action not in ACTIONS:
        raise SchemaError(f"{path}.action", f"must be one of {ACTIONS}, got {action!r}")
    reliability = _require(entry, "reliability", (int,), path)
    if isinstance(reliability, bool) or not 1 <= reliability <= 100:
        raise SchemaError(f"{path}.reliability", f"must be an integer in [1, 100], got {reliability!r}")
    _require(entry, "rationale", str, path)
    stage = entry.get("stage")
    if stage in LEAKAGE_STAGES:
        flag = _require(entry, "leakage_flag", bool, path)
        if not isinstance(flag, bool):
            raise SchemaError(f"{path}.leakage_flag", "must be a boolean")
    if is_final:
        _require(entry, "most_influential", str, path)
        _require(entry, "most_reliable", str, path)
        size = _require(entry, "trade_size", (int,), path)
        if isinstance(size, bool) or size not in TRADE_SIZES:
            raise SchemaError(f"{path}.trade_size", f"must be one of {TRADE_SIZES}, got {size!r}")


def _validate_day(day: dict, index: int, path: str) -> bool:
    """Validate one day; returns True when the day is complete (final present)."""
    day_index = _require(day, "day_index", (int,), path)
    if day_index != index + 1:
        raise SchemaError(f"{path}.day_index", f"expected {index + 1}, got {day_index}")
    stages = _require(day, "stages", list, path)
    if not stages:
        raise SchemaError(f"{path}.stages", "day must contain at least stage d0")
    for pos, entry in enumerate(stages):
        entry_path = f"{path}.stages[{pos}]"
        if not isinstance(entry, dict):
            raise SchemaError(entry_path, "stage entry must be a mapping")
        stage = _require(entry, "stage", str, entry_path)
        if pos >= len(STAGES) or stage != STAGES[pos]:
            expected = STAGES[pos] if pos < len(STAGES) else "nothing"
            raise SchemaError(
                f"{entry_path}.stage",
                f"stage order violation: expected {expected!r} at position {pos}, got {stage!r}",
            )
        _validate_stage_entry(entry, entry_path, is_final=(stage == "final"))
    return stages[-1]["stage"] == "final"


def validate_session_export(body: dict) -> None:
    _require(body, "user_id", str, "$")
    _require(body, "ticker", str, "$")
    demo = _require(body, "demographics", dict, "$")
    _require(demo, "education_level", str, "$.demographics")
    _require(demo, "finance_experience", str, "$.demographics")
    current = _require(body, "current_day", (int,), "$")
    if isinstance(current, bool) or current < 1:
        raise SchemaError("$.current_day", f"must be a positive integer, got {current!r}")
    days = _require(body, "days", list, "$")
    complete_flags = []
    for i, day in enumerate(days):
        if not isinstance(day, dict):
            raise SchemaError(f"$.days[{i}]", "day must be a mapping")
        complete_flags.append(_validate_day(day, i, f"$.days[{i}]"))
    for i, complete in enumerate(complete_flags[:-1]):
        if not complete:
            raise SchemaError(
                f"$.days[{i}]", "locked-day violation: only the last day may be incomplete"
            )
    if days:
        if current < len(days) or current > len(days) + 1:
            raise SchemaError(
                "$.current_day",
                f"must point at the last day ({len(days)}) or the next one, got {current}",
            )
        if current == len(days) + 1 and not complete_flags[-1]:
            raise SchemaError("$.current_day", "cannot advance past an incomplete day")
    validate_portfolio_state(_require(body, "portfolio", dict, "$"), path="$.portfolio")


def validate_portfolio_state(body: dict, path: str = "$") -> None:
    cash = _require(body, "cash", (int, float), path)
    if isinstance(cash, bool) or cash < 0:
        raise SchemaError(f"{path}.cash", f"must be non-negative, got {cash!r}")
    shares = _require(body, "shares", (int,), path)
    if isinstance(shares, bool) or shares < 0:
        raise SchemaError(f"{path}.shares", f"must be a non-negative integer, got {shares!r}")
    mark = _require(body, "last_mark", (int, float), path)
    if isinstance(mark, bool) or mark < 0:
        raise SchemaError(f"{path}.last_mark", f"must be non-negative, got {mark!r}")


def validate_progress_marker(body: dict) -> None:
    _require(body, "user_id", str, "$")
    _require(body, "ticker", str, "$")
    day_index = _require(body, "day_index", (int,), "$")
    if isinstance(day_index, bool) or day_index < 1:
        raise SchemaError("$.day_index", f"must be a positive integer, got {day_index!r}")
    stage = _require(body, "stage", str, "$")
    if stage not in STAGES:
        raise SchemaError("$.stage", f"must be one of {STAGES}, got {stage!r}")
    _require(body, "updated_at", str, "$")


_VALIDATORS = {
    "session-export": validate_session_export,
    "portfolio-state": validate_portfolio_state,
    "progress-marker": validate_progress_marker,
}


def validate_body(kind: str, body) -> None:
    """Dispatch to the kind's validator; raises SchemaError on any violation."""
    if kind not in _VALIDATORS:
        raise ValueError(f"unknown kind {kind!r}")
    if not isinstance(body, dict):
        raise SchemaError("$", f"body must be a JSON object, got {type(body).__name__}")
    _VALIDATORS[kind](body)
