"""Websocket bridge: stream scene frames for one world, accept operator input.

Protocol (JSON text messages, ``protocol_version`` 1):

  server -> client
    {"type": "hello", "protocol_version", "mode", "num_worlds", "num_frames"}
    {"type": "terrain", "id", "x0", "spacing", "samples": [...]}
    {"type": "frame", "sim_step", "world", "mode", "paused", "terrain_id",
     "base": {"x", "z", "pitch"}, "joints": [...], "tips": [[x, z], ...],
     "contacts": [{"x", "z", "fx", "fz", "in_contact"}, ...],
     "command": {channel: value}, "rewards": {term: value},
     "replay": {"index", "total"} | null}
    {"type": "ack", "of": <msg type>} / {"type": "warning"|"error", "message"}

  client -> server
    {"type": "pause"} {"type": "resume"} {"type": "step_once"} {"type": "reset"}
    {"type": "select_world", "world": int} {"type": "set_rate", "hz": float}
    {"type": "push", "world": int, "fx": N, "fz": N}      (live mode only)
    {"type": "scrub", "frame": int}                       (replay mode only)

Stepping and serving share a session object: the simulation loop drains
queued control messages and honors the pause flag only between control steps,
so a paused-then-resumed run replays the exact unpaused trajectory. HTTP
endpoints: /healthz (mode, sim_step, paused) and the frontend's static files
at /.
"""

from __future__ import annotations

import asyncio
import json
import os
import threading
import time
from collections import deque

import numpy as np
import uvicorn
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .capture import CaptureDump, restore_model_fields
from .config import from_dict
from .sim import compile_model
from .sim.physics import contact_preview, fk_batch
from .terrain import generate_grid

PROTOCOL_VERSION = 1

_CONTROL_TYPES = {
    "pause", "resume", "step_once", "reset", "select_world", "set_rate", "push", "scrub",
}


class ViewerSession:
    """Shared state between the serving thread and the stepping loop."""

    def __init__(self, mode: str, num_worlds: int, rate_hz: float = 30.0):
        self.mode = mode  # "live" | "replay"
        self.num_worlds = num_worlds
        self.rate_hz = rate_hz
        self.paused = False
        self.step_once_requests = 0
        self.reset_requested = False
        self.selected_world = 0
        self.replay_index = 0
        self.num_frames = 0
        self.sim_step = 0
        self.latest_frame: dict | None = None
        self.terrain_msg: dict | None = None
        self._pushes: deque[tuple[int, float, float]] = deque()
        self._lock = threading.Lock()
        self.stopped = False

    # -- message handling (serving side) --------------------------------------

    def handle_message(self, text: str) -> dict:
        try:
            msg = json.loads(text)
        except json.JSONDecodeError as err:
            return {"type": "error", "message": f"malformed JSON: {err}"}
        kind = msg.get("type")
        if kind not in _CONTROL_TYPES:
            return {"type": "error", "message": f"unknown message type {kind!r}"}
        try:
            if kind == "pause":
                self.paused = True
            elif kind == "resume":
                self.paused = False
            elif kind == "step_once":
                with self._lock:
                    self.step_once_requests += 1
            elif kind == "reset":
                self.reset_requested = True
            elif kind == "select_world":
                world = int(msg["world"])
                if not 0 <= world < self.num_worlds:
                    return {
                        "type": "error",
                        "message": f"world {world} outside [0, {self.num_worlds})",
                    }
                self.selected_world = world
            elif kind == "set_rate":
                self.rate_hz = float(np.clip(float(msg["hz"]), 1.0, 120.0))
            elif kind == "push":
                if self.mode != "live":
                    return {"type": "error", "message": "push is only valid in live mode"}
                with self._lock:
                    self._pushes.append(
                        (int(msg["world"]), float(msg["fx"]), float(msg["fz"]))
                    )
            elif kind == "scrub":
                if self.mode != "replay":
                    return {"type": "error", "message": "scrub is only valid in replay mode"}
                frame = int(msg["frame"])
                clamped = int(np.clip(frame, 0, max(self.num_frames - 1, 0)))
                self.replay_index = clamped
                if clamped != frame:
                    return {
                        "type": "warning",
                        "message": f"frame {frame} clamped to {clamped}",
                    }
        except (KeyError, TypeError, ValueError) as err:
            return {"type": "error", "message": f"bad {kind} message: {err}"}
        return {"type": "ack", "of": kind}

    # -- stepping-loop side ----------------------------------------------------

    def drain_into(self, env) -> None:
        """Apply queued inputs; called only at control-step boundaries."""
        with self._lock:
            pushes = list(self._pushes)
            self._pushes.clear()
        for world, fx, fz in pushes:
            if 0 <= world < env.num_envs:
                env.state.ext_force[world, 0] += fx
                env.state.ext_force[world, 1] += fz
        if self.reset_requested:
            self.reset_requested = False
            env.reset()

    def wait_if_paused(self, env) -> None:
        """Block the stepping loop while paused; step_once lets one through."""
        self.drain_into(env)
        while self.paused and not self.stopped:
            with self._lock:
                if self.step_once_requests > 0:
                    self.step_once_requests -= 1
                    return
            time.sleep(0.01)
            self.drain_into(env)


def _terrain_message(terrain) -> dict:
    return {
        "type": "terrain",
        "protocol_version": PROTOCOL_VERSION,
        "id": f"terrain-{abs(hash(terrain.samples.tobytes())) % 10**10}",
        "x0": 0.0,
        "spacing": terrain.spacing,
        "samples": [round(float(v), 6) for v in terrain.samples],
    }


def _frame_message(
    session: ViewerSession,
    *,
    sim_step: int,
    world: int,
    base,
    joints,
    tips,
    contacts,
    command: dict,
    rewards: dict,
    replay: dict | None,
) -> dict:
    return {
        "type": "frame",
        "protocol_version": PROTOCOL_VERSION,
        "sim_step": int(sim_step),
        "world": int(world),
        "mode": session.mode,
        "paused": session.paused,
        "terrain_id": session.terrain_msg["id"] if session.terrain_msg else None,
        "base": {"x": float(base[0]), "z": float(base[1]), "pitch": float(base[2])},
        "joints": [float(v) for v in joints],
        "tips": [[float(x), float(z)] for x, z in tips],
        "contacts": contacts,
        "command": command,
        "rewards": rewards,
        "replay": replay,
    }


def create_app(session: ViewerSession, static_dir: str | None = None) -> FastAPI:
    app = FastAPI()

    @app.get("/healthz")
    def healthz():
        return {
            "protocol_version": PROTOCOL_VERSION,
            "mode": session.mode,
            "sim_step": session.sim_step,
            "paused": session.paused,
        }

    @app.websocket("/ws")
    async def ws(websocket: WebSocket):
        await websocket.accept()
        await websocket.send_text(
            json.dumps(
                {
                    "type": "hello",
                    "protocol_version": PROTOCOL_VERSION,
                    "mode": session.mode,
                    "num_worlds": session.num_worlds,
                    "num_frames": session.num_frames,
                }
            )
        )
        if session.terrain_msg is not None:
            await websocket.send_text(json.dumps(session.terrain_msg))
        if session.latest_frame is not None:
            await websocket.send_text(json.dumps(session.latest_frame))

        async def sender():
            last_sent = None
            while True:
                await asyncio.sleep(1.0 / session.rate_hz)
                frame = session.latest_frame
                if frame is not None and frame is not last_sent:
                    last_sent = frame
                    await websocket.send_text(json.dumps(frame))

        task = asyncio.create_task(sender())
        try:
            while True:
                text = await websocket.receive_text()
                reply = session.handle_message(text)
                await websocket.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            task.cancel()

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="frontend")
    return app


def _default_static_dir() -> str | None:
    here = os.path.dirname(os.path.abspath(__file__))
    for candidate in (
        os.path.join(os.getcwd(), "frontend", "dist"),
        os.path.abspath(os.path.join(here, "..", "..", "frontend", "dist")),
    ):
        if os.path.isdir(candidate):
            return candidate
    return None


class Bridge:
    """A served session plus the helpers the stepping loop calls."""

    def __init__(self, session: ViewerSession, app: FastAPI, server=None, thread=None):
        self.session = session
        self.app = app
        self._server = server
        self._thread = thread
        self._replay_scene = None

    # -- live ------------------------------------------------------------------

    @classmethod
    def serve_live(cls, env, policy=None, port: int = 8800, rate_hz: float = 30.0,
                   start_server: bool = True) -> "Bridge":
        session = ViewerSession("live", env.num_envs, rate_hz)
        session.terrain_msg = _terrain_message(env.terrain)
        bridge = cls(session, create_app(session, _default_static_dir()))
        bridge.publish(env)
        if start_server:
            bridge._start(port)
        return bridge

    def publish(self, env) -> None:
        """Snapshot the selected world into the latest FrameMsg."""
        session = self.session
        w = session.selected_world
        data = env.entity_data
        cache = env.state.contact
        contacts = [
            {
                "x": float(cache.foot_pos[w, i, 0]),
                "z": float(cache.foot_pos[w, i, 1]),
                "fx": float(cache.tangent_force[w, i]),
                "fz": float(cache.normal_force[w, i]),
                "in_contact": bool(cache.in_contact[w, i]),
            }
            for i in range(cache.normal_force.shape[1])
        ]
        command = {
            ch: float(env.command_manager.command[w, i])
            for i, ch in enumerate(env.command_manager.channels)
        }
        rewards = {
            name: float(values[w]) for name, values in env.reward_manager.last_values.items()
        }
        session.sim_step = env.state.sim_step
        session.latest_frame = _frame_message(
            session,
            sim_step=env.state.sim_step,
            world=w,
            base=env.state.q[w, 0:3],
            joints=env.state.q[w, 3:],
            tips=data.body_pos[w, 1:, :],
            contacts=contacts,
            command=command,
            rewards=rewards,
            replay=None,
        )

    # -- replay ----------------------------------------------------------------

    @classmethod
    def serve_replay(cls, dump: CaptureDump, port: int = 8800, rate_hz: float = 30.0,
                     start_server: bool = True) -> "Bridge":
        from .env import EnvCfg  # local import: env pulls in the whole stack

        session = ViewerSession("replay", dump.n_worlds, rate_hz)
        session.num_frames = len(dump.frames)
        session.paused = True  # replay starts paused on frame 0
        cfg = from_dict(EnvCfg, dump.config) if dump.config else None
        model = terrain = None
        if cfg is not None:
            model = compile_model(cfg.scene.model, dump.n_worlds)
            fields = dump.metadata.get("fields", {})
            for name, info in fields.items():
                if name not in model.field_names():
                    model.register_field(name, np.asarray(info["value"], dtype=np.float64))
            restore_model_fields(model, fields)
            terrain = generate_grid(cfg.scene.terrain, cfg.seed)
            session.terrain_msg = _terrain_message(terrain)
        bridge = cls(session, create_app(session, _default_static_dir()))
        bridge._replay_scene = (dump, model, terrain)
        bridge.publish_replay_frame()
        if start_server:
            bridge._start(port)
        return bridge

    def publish_replay_frame(self) -> None:
        dump, model, terrain = self._replay_scene
        session = self.session
        if not dump.frames:
            return
        k = int(np.clip(session.replay_index, 0, len(dump.frames) - 1))
        frame = dump.frames[k]
        w = session.selected_world
        if model is not None:
            _, _, tips = fk_batch(model, frame.q[w : w + 1])
            foot_pos, f_n, f_t, touch = contact_preview(
                model, frame.q[w : w + 1], frame.qd[w : w + 1], terrain
            )
            tip_list = tips[0]
            contacts = [
                {
                    "x": float(foot_pos[0, i, 0]),
                    "z": float(foot_pos[0, i, 1]),
                    "fx": float(f_t[0, i]),
                    "fz": float(f_n[0, i]),
                    "in_contact": bool(touch[0, i]),
                }
                for i in range(f_n.shape[1])
            ]
        else:
            tip_list = []
            contacts = []
        session.sim_step = frame.sim_step
        session.latest_frame = _frame_message(
            session,
            sim_step=frame.sim_step,
            world=w,
            base=frame.q[w, 0:3],
            joints=frame.q[w, 3:],
            tips=tip_list,
            contacts=contacts,
            command={},
            rewards={},
            replay={"index": k, "total": len(dump.frames)},
        )

    def run_replay_loop(self) -> None:
        """Advance through frames at the configured rate; scrub overrides."""
        session = self.session
        last_index = session.replay_index
        while not session.stopped:
            if not session.paused:
                session.replay_index = (session.replay_index + 1) % max(session.num_frames, 1)
            if session.replay_index != last_index or not session.paused:
                last_index = session.replay_index
                self.publish_replay_frame()
            with session._lock:
                if session.step_once_requests:
                    session.step_once_requests -= 1
                    session.replay_index = (session.replay_index + 1) % max(
                        session.num_frames, 1
                    )
                    self.publish_replay_frame()
            time.sleep(1.0 / session.rate_hz)

    # -- server lifecycle --------------------------------------------------------

    def _start(self, port: int) -> None:
        config = uvicorn.Config(
            self.app, host="127.0.0.1", port=port, log_level="warning", lifespan="off"
        )
        self._server = uvicorn.Server(config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)
        self._thread.start()
        deadline = time.time() + 5.0
        while not self._server.started and time.time() < deadline:
            time.sleep(0.02)

    def stop(self) -> None:
        self.session.stopped = True
        if self._server is not None:
            self._server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout=3.0)
