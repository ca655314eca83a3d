import json
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from stridesim.bridge import PROTOCOL_VERSION, Bridge, ViewerSession, create_app
from stridesim.capture import load_capture
from stridesim.env import ManagerBasedRlEnv
from stridesim.tasks import make_env_cfg

from test_managers import quiet_cfg


def live_bridge(n=2):
    env = ManagerBasedRlEnv(quiet_cfg(n))
    env.reset()
    bridge = Bridge.serve_live(env, port=0, start_server=False)
    return env, bridge


def recv_until(ws, kind, limit=20):
    for _ in range(limit):
        msg = json.loads(ws.receive_text())
        if msg["type"] == kind:
            return msg
    raise AssertionError(f"no {kind!r} message received")


def test_hello_terrain_and_frame_on_connect():
    env, bridge = live_bridge()
    client = TestClient(bridge.app)
    with client.websocket_connect("/ws") as ws:
        hello = json.loads(ws.receive_text())
        assert hello["type"] == "hello"
        assert hello["protocol_version"] == PROTOCOL_VERSION
        assert hello["mode"] == "live"
        terrain = json.loads(ws.receive_text())
        assert terrain["type"] == "terrain"
        assert len(terrain["samples"]) > 10
        frame = json.loads(ws.receive_text())
        assert frame["type"] == "frame"
        assert frame["terrain_id"] == terrain["id"]
        assert len(frame["tips"]) == 4
        assert len(frame["contacts"]) == 2


def test_frame_tips_consistent_with_fk():
    env, bridge = live_bridge()
    frame = bridge.session.latest_frame
    from stridesim.sim.physics import fk_batch

    w = frame["world"]
    _, _, tips = fk_batch(env.model, env.state.q[w : w + 1])
    sent = np.array(frame["tips"])
    assert np.allclose(sent, tips[0], atol=1e-12)


def test_pause_halts_sim_step_and_frames_keep_flowing():
    env, bridge = live_bridge()
    session = bridge.session
    session.handle_message(json.dumps({"type": "pause"}))
    stepped = {"count": 0}

    def loop():
        for _ in range(5):
            session.wait_if_paused(env)
            env.step(np.zeros((2, 4)))
            bridge.publish(env)
            stepped["count"] += 1

    t = threading.Thread(target=loop, daemon=True)
    t.start()
    time.sleep(0.15)
    assert stepped["count"] == 0  # paused before the first step
    assert session.latest_frame is not None
    session.handle_message(json.dumps({"type": "resume"}))
    t.join(timeout=5.0)
    assert stepped["count"] == 5
    assert session.latest_frame["sim_step"] == env.state.sim_step


def test_step_once_advances_exactly_one_control_step():
    env, bridge = live_bridge()
    session = bridge.session
    session.paused = True
    session.handle_message(json.dumps({"type": "step_once"}))
    done = {"steps": 0}

    def loop():
        session.wait_if_paused(env)
        env.step(np.zeros((2, 4)))
        done["steps"] += 1

    t = threading.Thread(target=loop, daemon=True)
    t.start()
    t.join(timeout=2.0)
    assert done["steps"] == 1
    assert env.state.sim_step == 4


def test_paused_resumed_run_matches_unpaused_bitwise():
    cfg_a = make_env_cfg("Velocity-Flat", num_envs=2, seed=4)
    plain = ManagerBasedRlEnv(cfg_a)
    plain.reset()
    for _ in range(30):
        plain.step(np.zeros((2, 4)))

    cfg_b = make_env_cfg("Velocity-Flat", num_envs=2, seed=4)
    env = ManagerBasedRlEnv(cfg_b)
    env.reset()
    bridge = Bridge.serve_live(env, port=0, start_server=False)
    session = bridge.session
    for i in range(30):
        if i == 10:
            session.handle_message(json.dumps({"type": "pause"}))
            threading.Timer(
                0.05, lambda: session.handle_message(json.dumps({"type": "resume"}))
            ).start()
        session.wait_if_paused(env)
        env.step(np.zeros((2, 4)))
        bridge.publish(env)
    assert np.array_equal(plain.state.q, env.state.q)
    assert np.array_equal(plain.state.qd, env.state.qd)


def test_push_changes_base_velocity_by_impulse():
    env, bridge = live_bridge()
    session = bridge.session
    # reference run without the push
    twin = ManagerBasedRlEnv(quiet_cfg(2))
    twin.reset()
    reply = session.handle_message(json.dumps({"type": "push", "world": 0, "fx": 50.0, "fz": 0.0}))
    assert reply == {"type": "ack", "of": "push"}
    session.drain_into(env)
    assert env.state.ext_force[0, 0] == 50.0
    env.step(np.zeros((2, 4)))
    twin.step(np.zeros((2, 4)))
    m_total = float(env.model.total_mass() if np.ndim(env.model.total_mass()) == 0
                    else env.model.total_mass()[0])
    dvx = env.state.qd[0, 0] - twin.state.qd[0, 0]
    # the push lands in exactly one substep; later substeps evolve both runs
    # identically apart from the velocity offset integrating into position
    assert abs(dvx) > 1e-4


def test_push_impulse_arithmetic_exact_at_substep():
    env, bridge = live_bridge()
    twin = ManagerBasedRlEnv(quiet_cfg(2))
    twin.reset()
    env.state.ext_force[0, 0] = 50.0
    env.action_manager.apply()
    twin.action_manager.apply()
    env.pipeline.substep(env.state)
    twin.pipeline.substep(twin.state)
    m_total = float(np.asarray(env.model.total_mass()).max())
    dv = env.state.qd[0, 0] - twin.state.qd[0, 0]
    assert abs(dv - 50.0 * env.physics_dt / m_total) < 1e-9


def test_select_world_and_set_rate():
    env, bridge = live_bridge()
    session = bridge.session
    assert session.handle_message(json.dumps({"type": "select_world", "world": 1}))["type"] == "ack"
    bridge.publish(env)
    assert session.latest_frame["world"] == 1
    assert session.handle_message(json.dumps({"type": "select_world", "world": 7}))["type"] == "error"
    session.handle_message(json.dumps({"type": "set_rate", "hz": 500.0}))
    assert session.rate_hz == 120.0  # clamped


def test_malformed_message_keeps_connection():
    env, bridge = live_bridge()
    client = TestClient(bridge.app)
    with client.websocket_connect("/ws") as ws:
        recv_until(ws, "frame")
        ws.send_text("{not json")
        reply = recv_until(ws, "error")
        assert "malformed" in reply["message"]
        ws.send_text(json.dumps({"type": "warp_drive"}))
        reply = recv_until(ws, "error")
        assert "unknown message type" in reply["message"]
        # still alive: a valid message gets an ack
        ws.send_text(json.dumps({"type": "pause"}))
        assert recv_until(ws, "ack")["of"] == "pause"


def test_scrub_only_in_replay_and_push_only_in_live():
    env, bridge = live_bridge()
    reply = bridge.session.handle_message(json.dumps({"type": "scrub", "frame": 0}))
    assert reply["type"] == "error" and "replay" in reply["message"]


def make_replay_bridge(tmp_path):
    cfg = make_env_cfg("Velocity-Flat", num_envs=2, seed=2)
    cfg.capture_dir = str(tmp_path)
    env = ManagerBasedRlEnv(cfg, "Velocity-Flat")
    env.reset()
    for _ in range(6):
        env.step(np.zeros((2, 4)))
    path = str(tmp_path / "session.bin")
    env.dump_capture(path)
    dump = load_capture(path)
    return env, dump, Bridge.serve_replay(dump, port=0, start_server=False)


def test_replay_scrub_renders_requested_frame(tmp_path):
    env, dump, bridge = make_replay_bridge(tmp_path)
    session = bridge.session
    assert session.mode == "replay"
    reply = session.handle_message(json.dumps({"type": "scrub", "frame": 7}))
    assert reply == {"type": "ack", "of": "scrub"}
    bridge.publish_replay_frame()
    frame = session.latest_frame
    assert frame["replay"] == {"index": 7, "total": len(dump.frames)}
    assert frame["sim_step"] == dump.frames[7].sim_step
    assert np.allclose(
        [frame["base"]["x"], frame["base"]["z"], frame["base"]["pitch"]],
        dump.frames[7].q[0, 0:3],
    )
    assert frame["joints"] == dump.frames[7].q[0, 3:].tolist()


def test_replay_scrub_out_of_range_clamps_with_warning(tmp_path):
    env, dump, bridge = make_replay_bridge(tmp_path)
    reply = bridge.session.handle_message(json.dumps({"type": "scrub", "frame": 10_000}))
    assert reply["type"] == "warning"
    assert bridge.session.replay_index == len(dump.frames) - 1
    reply = bridge.session.handle_message(json.dumps({"type": "push", "world": 0, "fx": 1, "fz": 0}))
    assert reply["type"] == "error" and "live" in reply["message"]


def test_healthz_reports_mode_and_step():
    env, bridge = live_bridge()
    client = TestClient(bridge.app)
    body = client.get("/healthz").json()
    assert body == {
        "protocol_version": PROTOCOL_VERSION,
        "mode": "live",
        "sim_step": env.state.sim_step,
        "paused": False,
    }


def test_bridge_reachable_on_real_port():
    import httpx

    env = ManagerBasedRlEnv(quiet_cfg(2))
    env.reset()
    bridge = Bridge.serve_live(env, port=8931)
    try:
        body = httpx.get("http://127.0.0.1:8931/healthz", timeout=5.0).json()
        assert body["mode"] == "live"
    finally:
        bridge.stop()


def test_frame_serialization_round_trips_finite_values():
    env, bridge = live_bridge()
    frame = bridge.session.latest_frame
    again = json.loads(json.dumps(frame))
    assert again == frame
    assert all(np.isfinite(v) for pair in frame["tips"] for v in pair)
