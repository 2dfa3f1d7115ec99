"""Chat-completion provider abstraction with fully deterministic mocks.

All model access goes through ``ChatProvider.complete``; the orchestration
layer never touches a transport directly. Mock providers are pure functions of
(spec, seed, request) so every pipeline run is reproducible offline. The HTTP
provider speaks a chat-completion style wire format and is kept out of the
deterministic test path; its transport is injectable for testing.
"""

from __future__ import annotations

import json
import logging
import os
import time
import urllib.request
from dataclasses import dataclass
from typing import Callable, Protocol

from .utils import stable_rng

logger = logging.getLogger(__name__)


class ProviderError(Exception):
    pass


@dataclass(frozen=True)
class ProviderSpec:
    provider_id: str
    endpoint: str = "mock://analyst"
    model: str = "mock"
    timeout_sec: float = 30.0
    max_retries: int = 1
    deterministic: bool = True
    api_key_env: str = "QUORUMTRADE_API_KEY"


@dataclass(frozen=True)
class ProviderRequest:
    system: str
    user: str
    schema_id: str | None = None


class ChatProvider(Protocol):
    spec: ProviderSpec

    def complete(self, request: ProviderRequest) -> str: ...


def parse_context_header(user_text: str) -> dict[str, str]:
    """Read the ``context:`` header line the orchestrator embeds in prompts."""
    for line in user_text.splitlines():
        if line.startswith("context:"):
            fields = {}
            for token in line[len("context:"):].split():
                if "=" in token:
                    k, v = token.split("=", 1)
                    fields[k] = v
            return fields
    return {}


class MockAnalystProvider:
    """Deterministic domain-report writer emitting the claim bullet grammar.

    Providers largely agree on the schema claims derived from the temporal
    context (that is the consensus signal); a seeded per-provider stream adds
    occasional noise claims, polarity flips, and future-dated claims so the
    downstream audit paths are actually exercised.
    """

    NOISE_P = 0.30
    FLIP_P = 0.08
    FUTURE_P = 0.05

    def __init__(self, spec: ProviderSpec, seed: int = 0):
        self.spec = spec
        self.seed = seed

    def complete(self, request: ProviderRequest) -> str:
        ctx = parse_context_header(request.user)
        ticker = ctx.get("ticker", "UNKNOWN")
        day = ctx.get("date", "1970-01-01")
        domain = ctx.get("domain", "market")
        direction = ctx.get("direction", "UNCERTAIN")
        week_ret = float(ctx.get("week_return", "0"))
        cutoff = ctx.get("cutoff", f"{day}T13:00:00")
        rng = stable_rng(self.seed, self.spec.provider_id, ticker, day, domain)

        pol = {"UP": 1, "DOWN": -1}.get(direction, 0)
        lines = [
            f"{domain} | {ticker} | near-term-outlook | {pol:+d} | | {cutoff}",
            f"{domain} | {ticker} | one-week-return | {1 if week_ret > 0 else -1 if week_ret < 0 else 0:+d}"
            f" | {week_ret * 100:.2f} pct | {cutoff}",
        ]
        if rng.random() < self.FLIP_P:
            lines[0] = f"{domain} | {ticker} | near-term-outlook | {-pol:+d} | | {cutoff}"
        if rng.random() < self.NOISE_P:
            noise_val = float(rng.uniform(-5, 5))
            lines.append(
                f"{domain} | {ticker} | {self.spec.provider_id}-idiosyncratic-view"
                f" | {int(rng.choice([-1, 1])):+d} | {noise_val:.2f} pct | {cutoff}"
            )
        if rng.random() < self.FUTURE_P:
            future = f"{day}T23:59:00"
            lines.append(f"{domain} | {ticker} | after-hours-move | +1 | | {future}")
        return "\n".join(lines) + "\n"


class MockTraderProvider:
    """Structured-output trader double: follows the proposal in the context."""

    def __init__(self, spec: ProviderSpec, seed: int = 0):
        self.spec = spec
        self.seed = seed

    def complete(self, request: ProviderRequest) -> str:
        ctx = parse_context_header(request.user)
        action = ctx.get("proposal", "HOLD")
        pct = int(ctx.get("proposal_pct", "0"))
        return json.dumps(
            {
                "action": action,
                "trade_pct": 0 if action == "HOLD" else pct,
                "confidence": float(ctx.get("proposal_confidence", "50")),
                "rationale": "follow the deterministic proposal",
            }
        )


class MockReflectionProvider:
    """Echoes the performance digest lines back as the reflection text."""

    def __init__(self, spec: ProviderSpec, seed: int = 0):
        self.spec = spec
        self.seed = seed

    def complete(self, request: ProviderRequest) -> str:
        digest_lines = [
            line for line in request.user.splitlines()
            if line.startswith("[") or "no realized outcomes" in line
        ]
        body = "\n".join(digest_lines) if digest_lines else "no horizon data"
        return f"reflection digest echo:\n{body}\n"


#: transport(payload, timeout_sec) -> parsed JSON response
Transport = Callable[[dict, float], dict]


def _urllib_transport_factory(url: str, api_key: str | None) -> Transport:
    def transport(payload: dict, timeout_sec: float) -> dict:
        req = urllib.request.Request(
            url,
            data=json.dumps(payload).encode(),
            headers={
                "Content-Type": "application/json",
                **({"Authorization": f"Bearer {api_key}"} if api_key else {}),
            },
        )
        with urllib.request.urlopen(req, timeout=timeout_sec) as resp:
            return json.loads(resp.read().decode())

    return transport


class HttpChatProvider:
    """Minimal chat-completion client with bounded retries.

    Credentials come from the environment variable named by ``api_key_env``;
    the transport is injectable so tests never hit the network.
    """

    def __init__(self, spec: ProviderSpec, transport: Transport | None = None):
        self.spec = spec
        self._transport = transport or _urllib_transport_factory(
            spec.endpoint, os.environ.get(spec.api_key_env)
        )

    def complete(self, request: ProviderRequest) -> str:
        payload = {
            "model": self.spec.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        }
        if self.spec.deterministic:
            payload["temperature"] = 0
        last_exc: Exception | None = None
        for attempt in range(self.spec.max_retries + 1):
            try:
                data = self._transport(payload, self.spec.timeout_sec)
                return data["choices"][0]["message"]["content"]
            except Exception as exc:  # noqa: BLE001 - provider boundary
                last_exc = exc
                logger.warning(
                    "%s attempt %d/%d failed: %s",
                    self.spec.provider_id, attempt + 1, self.spec.max_retries + 1, exc,
                )
                if attempt < self.spec.max_retries:
                    time.sleep(min(0.1 * 2 ** attempt, 2.0))
        raise ProviderError(f"{self.spec.provider_id}: {last_exc}") from last_exc


def make_provider(spec: ProviderSpec, seed: int = 0, transport: Transport | None = None) -> ChatProvider:
    """Resolve a spec to a provider by endpoint scheme."""
    if spec.endpoint.startswith("mock://"):
        kind = spec.endpoint[len("mock://"):]
        cls = {
            "analyst": MockAnalystProvider,
            "trader": MockTraderProvider,
            "reflection": MockReflectionProvider,
        }.get(kind)
        if cls is None:
            raise ProviderError(f"unknown mock provider kind {kind!r}")
        return cls(spec, seed)
    if spec.endpoint.startswith(("http://", "https://")):
        return HttpChatProvider(spec, transport)
    raise ProviderError(f"unsupported endpoint {spec.endpoint!r}")
