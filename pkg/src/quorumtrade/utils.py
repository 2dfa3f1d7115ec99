"""Small shared helpers (deterministic seeding, stable JSON)."""

from __future__ import annotations

import hashlib
import json

import numpy as np


def stable_seed(*parts) -> int:
    """Platform-stable 64-bit seed from any printable parts.

    Never use the builtin ``hash`` for this; it is salted per process.
    """
    key = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")


def stable_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(stable_seed(*parts))


def dump_json(obj, path=None) -> str:
    """Deterministic JSON text (sorted keys, no float munging)."""
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is not None:
        path.write_text(text)
    return text
