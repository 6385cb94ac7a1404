"""Live session service: WebSocket `/session` plus HTTP health/metrics/create.

One asyncio tick loop per session; encoder training runs in a worker thread
with the environment paused, so ticks never interleave with updates.
"""
from __future__ import annotations

import asyncio
import json
import os
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from ..configs import resolve_env_config
from ..envs import EnvConfig
from ..hitl import AshaConfig
from ..pretrain import PretrainedModel
from .core import DEFAULT_TICK_HZ, SessionCore
from .protocol import ProtocolError, WireMessage

DEFAULT_PORT = 8732  # override with ASHA_PORT


@dataclass
class LiveSession:
    core: SessionCore
    clients: list[WebSocket] = field(default_factory=list)
    ticker: asyncio.Task | None = None
    log_path: Path | None = None

    async def broadcast(self, messages: list[WireMessage]) -> None:
        if not messages:
            return
        dead = []
        for ws in self.clients:
            try:
                for m in messages:
                    await ws.send_text(m.to_json())
            except Exception:
                dead.append(ws)
        for ws in dead:
            self.clients.remove(ws)

    def dump_logs(self) -> None:
        if self.log_path is None:
            return
        with open(self.log_path, "w") as f:
            for entry in self.core.input_log:
                f.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")
            for fb in self.core.feedback_log:
                f.write(json.dumps({"feedback_event": fb}, sort_keys=True) + "\n")


def create_app(models: dict[str, PretrainedModel] | None = None,
               checkpoint_dir: str | None = None,
               log_dir: str | None = None,
               tick_hz: float = DEFAULT_TICK_HZ) -> FastAPI:
    app = FastAPI(title="asha session service")
    sessions: dict[str, LiveSession] = {}
    app.state.sessions = sessions
    loaded: dict[str, PretrainedModel] = dict(models or {})

    def get_model(kind: str) -> PretrainedModel:
        if kind not in loaded:
            if checkpoint_dir is None:
                raise KeyError(f"no checkpoint loaded for env kind {kind!r}")
            loaded[kind] = PretrainedModel.load(Path(checkpoint_dir) / f"{kind}.asha")
        return loaded[kind]

    @app.get("/health")
    def health():
        return {"status": "ok", "sessions": len(sessions)}

    @app.get("/metrics")
    def metrics():
        return {sid: s.core.metrics() for sid, s in sessions.items()}

    @app.post("/session")
    async def create_session(body: dict):
        kind = body.get("env", "switch")
        try:
            model = get_model(kind)
        except KeyError as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        env_config = (EnvConfig.from_dict(body["env_config"]) if "env_config" in body
                      else resolve_env_config(body.get("config", f"{kind}_online")))
        cfg = AshaConfig.for_kind(model.kind)
        if "asha" in body:
            for key, value in body["asha"].items():
                setattr(cfg, key, value)
        seed = int(body.get("seed", 0))
        session_id = body.get("session_id") or uuid.uuid4().hex[:8]
        core = SessionCore(model, env_config, cfg, seed, session_id=session_id,
                           tick_hz=float(body.get("tick_hz", tick_hz)),
                           max_episodes=body.get("max_episodes"))
        log_path = Path(log_dir) / f"{session_id}.jsonl" if log_dir else None
        sessions[session_id] = LiveSession(core=core, log_path=log_path)
        return {"session_id": session_id, "env": kind,
                "tick_period_ms": 1000.0 / core.tick_hz}

    async def tick_loop(live: LiveSession) -> None:
        core = live.core
        period = 1.0 / core.tick_hz
        loop = asyncio.get_running_loop()
        next_at = loop.time() + period
        while core.phase != "done":
            await asyncio.sleep(max(0.0, next_at - loop.time()))
            next_at += period
            msgs = core.tick()
            await live.broadcast(msgs)
            if core.phase == "training":
                out = await loop.run_in_executor(None, core.run_training_job)
                await live.broadcast(out)
                next_at = loop.time() + period  # env was paused; restart cadence
            live.dump_logs()
        await live.broadcast([])

    @app.websocket("/session")
    async def session_socket(ws: WebSocket):
        await ws.accept()
        session_id = ws.query_params.get("session_id", "")
        live = sessions.get(session_id)
        if live is None:
            await ws.send_text(WireMessage("error", session_id, 0,
                                           {"message": "unknown session"}).to_json())
            await ws.close()
            return
        live.clients.append(ws)
        core = live.core
        if core.phase == "idle":
            await live.broadcast(core.start())
            live.ticker = asyncio.create_task(tick_loop(live))
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = WireMessage.parse(raw)
                except (ProtocolError, json.JSONDecodeError) as exc:
                    await ws.send_text(WireMessage("error", session_id, 0,
                                                   {"message": str(exc)}).to_json())
                    continue
                if msg.type == "input_frame":
                    err = core.on_input(msg)
                    if err is not None:
                        await ws.send_text(err.to_json())
                elif msg.type == "feedback":
                    # the tick loop alone runs training jobs; this only transitions phase
                    out = core.on_feedback(msg)
                    await live.broadcast(out)
                else:
                    await ws.send_text(WireMessage("error", session_id, 0,
                                                   {"message": f"unexpected {msg.type}"}).to_json())
        except WebSocketDisconnect:
            if ws in live.clients:
                live.clients.remove(ws)

    return app


def main_port() -> int:
    return int(os.environ.get("ASHA_PORT", DEFAULT_PORT))
