"""Wire protocol for live sessions: newline-free JSON messages over one socket.

Every message: {"type": ..., "session_id": ..., "seq": ..., "payload": {...}}.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

MESSAGE_TYPES = (
    "state_frame",
    "input_frame",
    "feedback",
    "task_prompt",
    "train_status",
    "metrics_frame",
    "error",
)

PHASES = ("idle", "calibrating", "episode_running", "awaiting_feedback", "training", "done")

PHASE_TRANSITIONS = {
    "idle": {"calibrating", "episode_running"},
    "calibrating": {"training", "episode_running", "calibrating"},
    "episode_running": {"awaiting_feedback", "episode_running", "training"},
    "awaiting_feedback": {"episode_running", "training"},
    "training": {"episode_running", "done"},
}


@dataclass
class WireMessage:
    type: str
    session_id: str
    seq: int
    payload: dict[str, Any]

    def to_json(self) -> str:
        text = json.dumps(
            {"type": self.type, "session_id": self.session_id, "seq": self.seq,
             "payload": self.payload},
            sort_keys=True, separators=(",", ":"),
        )
        if "\n" in text:
            raise ValueError("wire messages must be newline-free")
        return text

    @staticmethod
    def parse(raw: str | bytes) -> "WireMessage":
        d = json.loads(raw)
        for key in ("type", "session_id", "seq", "payload"):
            if key not in d:
                raise ProtocolError(f"missing field {key!r}")
        if d["type"] not in MESSAGE_TYPES:
            raise ProtocolError(f"unknown message type {d['type']!r}")
        if not isinstance(d["seq"], int):
            raise ProtocolError("seq must be an integer")
        if not isinstance(d["payload"], dict):
            raise ProtocolError("payload must be an object")
        return WireMessage(d["type"], d["session_id"], d["seq"], d["payload"])


class ProtocolError(ValueError):
    pass


def validate_input_frame(payload: dict) -> tuple[float, float, list]:
    try:
        x, y = float(payload["x"]), float(payload["y"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"bad input frame: {exc}") from exc
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ProtocolError("cursor outside [0, 1]^2")
    return x, y, payload.get("buttons", [])
