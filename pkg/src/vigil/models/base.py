"""Model plug-in contract and the serialized artifact envelope.

Artifacts are canonical JSON (sorted keys, fixed separators, UTF-8) so a
fit with the same seed and data produces bit-identical bytes and a
serialize/deserialize round-trip is exact:

    {"schema_version": 1, "model_type": ..., "created_ts": ...,
     "payload": {...}, "config": {...}}
"""

from __future__ import annotations

import json
from typing import Any, Callable

from ..errors import InvalidInput

SCHEMA_VERSION = 1

# model_type -> payload decoder returning the model object
MODEL_TYPES: dict[str, Callable[[dict], Any]] = {}


def register_model_type(model_type: str, from_payload: Callable[[dict], Any]) -> None:
    MODEL_TYPES[model_type] = from_payload


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False, allow_nan=False).encode("utf-8")


def serialize_model(model, created_ts: int, config: dict | None = None) -> bytes:
    """Seal a fitted model into the artifact envelope."""
    envelope = {
        "schema_version": SCHEMA_VERSION,
        "model_type": model.model_type,
        "created_ts": int(created_ts),
        "payload": model.to_payload(),
        "config": config or {},
    }
    return canonical_json(envelope)


def deserialize_model(blob: bytes):
    """Open an artifact envelope; returns (model, envelope dict)."""
    try:
        envelope = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"unreadable model artifact: {exc}") from exc
    if envelope.get("schema_version") != SCHEMA_VERSION:
        raise InvalidInput("unsupported artifact schema version",
                           got=envelope.get("schema_version"))
    model_type = envelope.get("model_type")
    decoder = MODEL_TYPES.get(model_type)
    if decoder is None:
        raise InvalidInput("unknown model type in artifact", model_type=model_type)
    return decoder(envelope["payload"]), envelope
