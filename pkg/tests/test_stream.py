import json
import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from lmtdock.configs import load_baseline_gains, load_harbor, load_reward, load_vessel
from lmtdock.env import Environment, EpisodeParams
from lmtdock.evalkit.rollout import rollout
from lmtdock.evalkit.starts import gen_starting_points
from lmtdock.policy import ACTION_HIGH, ACTION_LOW, BaselinePolicy
from lmtdock.stream import ScenarioConfig, create_app, encode_frame, parse_command

FAST = EpisodeParams(max_steps=400)


def scenario(**kw):
    # fast enough for tests, slow enough that a client always catches frames
    base = dict(start_seed=99, start_index=0, params=FAST, realtime_factor=100.0)
    base.update(kw)
    return ScenarioConfig(**base)


def read_frames(ws, n):
    """Read the next n frame messages, skipping command acknowledgements."""
    frames = []
    while len(frames) < n:
        msg = json.loads(ws.receive_text())
        if "step" in msg or "done" in msg:
            frames.append(msg)
    return frames


class TestSchema:
    def test_frame_round_trip(self):
        env = Environment(geom=load_harbor(), model=load_vessel(), reward_params=load_reward())
        from lmtdock.env import EpisodeEngine

        policy = BaselinePolicy(load_baseline_gains(), env.model.thrusters)
        engine = EpisodeEngine(policy, env, env.geom.berth_point)
        frame = encode_frame(engine.step())
        encoded = json.dumps(frame)
        assert json.loads(encoded) == frame
        assert frame["v"] == 1
        assert len(frame["state"]) == 9
        assert set(frame["forces"]) == {"fx", "fy", "torque"}
        assert set(frame["reward"]) == {"total", "r_dd", "r_psi", "r_obs", "r_ddot"}
        assert frame["mode"] == "auto"

    def test_compressed_keys_match_operator_groups(self):
        env = Environment(geom=load_harbor(), model=load_vessel(), reward_params=load_reward())
        from lmtdock.env import EpisodeEngine
        from lmtdock.tree.model import LeafNode, LmTree

        W = np.zeros((5, 10))
        W[:, 0] = 1.0
        tree = LmTree(nodes=[LeafNode(W=W, n_samples=10, loss=0.0)])
        policy = BaselinePolicy(load_baseline_gains(), env.model.thrusters)
        engine = EpisodeEngine(policy, env, env.geom.berth_point, shadow_tree=tree)
        frame = encode_frame(engine.step())
        attr = frame["attr"]
        assert list(attr["compressed"]) == ["distance", "velocity", "obstacle", "heading"]
        assert len(attr["raw"]) == 5
        assert len(attr["raw"][0]) == 9
        assert len(attr["combined"]) == 9
        assert isinstance(attr["degenerate"], bool)

    def test_unknown_command(self):
        cmd, err = parse_command('{"cmd": "warp"}')
        assert cmd is None
        assert err == "unknown_command"

    def test_bad_json(self):
        cmd, err = parse_command("{nope")
        assert err == "bad_json"

    def test_unknown_fields_ignored(self):
        cmd, err = parse_command('{"cmd": "pause", "extra": 42}')
        assert err is None
        assert cmd["cmd"] == "pause"


class TestServer:
    def test_health_and_scenario(self):
        app = create_app(scenario())
        with TestClient(app) as client:
            assert client.get("/health").json()["status"] == "ok"
            info = client.get("/scenario").json()
            assert info["policy"] == "baseline"
            assert info["schema_version"] == 1
            assert info["params"]["max_steps"] == 400

    def test_runs_to_completion_without_clients(self):
        app = create_app(scenario(realtime_factor=0.0))
        with TestClient(app) as client:
            import time

            session = app.state.session
            for _ in range(200):
                if client.get("/health").json()["finished"]:
                    break
                time.sleep(0.05)
            assert client.get("/health").json()["finished"]
            assert session.outcome in ("reached_berth", "collided", "timeout")

    def test_frames_gap_free_and_monotonic(self):
        app = create_app(scenario())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                frames = read_frames(ws, 50)
            steps = [f["step"] for f in frames if "step" in f]
            assert steps == list(range(steps[0], steps[0] + len(steps)))

    def test_served_trajectory_matches_rollout(self):
        cfg = scenario()
        geom = load_harbor()
        env = Environment(
            geom=geom, model=load_vessel(), reward_params=load_reward(), params=FAST
        )
        policy = BaselinePolicy(load_baseline_gains(), env.model.thrusters)
        start = gen_starting_points(1, seed=99, geom=geom)[0]
        ep = rollout(policy, env, start)
        app = create_app(cfg)
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                frames = read_frames(ws, min(60, len(ep.steps)))
        for frame in frames:
            if "step" not in frame:
                continue
            rec = ep.steps[frame["step"]]
            assert frame["pose"]["x"] == rec.pose.x
            assert frame["pose"]["y"] == rec.pose.y
            assert frame["pose"]["psi"] == rec.pose.psi
            assert frame["state"] == list(rec.state)
            assert frame["reward"]["total"] == rec.reward.total

    def test_takeover_set_action_release(self):
        app = create_app(scenario())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(json.dumps({"cmd": "takeover"}))
                ws.send_text(
                    json.dumps(
                        {
                            "cmd": "set_action",
                            "action": {"f1": 0, "f2": 0, "f3": 0, "alpha1": 0, "alpha2": 0},
                        }
                    )
                )
                saw_human = False
                zero_applied = False
                for _ in range(120):
                    msg = json.loads(ws.receive_text())
                    if "ok" in msg or "err" in msg:
                        assert "err" not in msg, msg
                        continue
                    if msg.get("mode") == "human":
                        saw_human = True
                        act = msg["action"]
                        if all(act[k] == 0.0 for k in act):
                            zero_applied = True
                            break
                assert saw_human and zero_applied
                ws.send_text(json.dumps({"cmd": "release"}))
                saw_auto = False
                for _ in range(120):
                    msg = json.loads(ws.receive_text())
                    if "step" in msg and msg.get("mode") == "auto":
                        saw_auto = True
                        break
                assert saw_auto

    def test_set_action_requires_takeover(self):
        app = create_app(scenario())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(
                    json.dumps(
                        {
                            "cmd": "set_action",
                            "action": {"f1": 1, "f2": 1, "f3": 0, "alpha1": 0, "alpha2": 0},
                        }
                    )
                )
                while True:
                    msg = json.loads(ws.receive_text())
                    if "err" in msg:
                        assert msg["err"] == "not_in_takeover"
                        break

    def test_server_side_clamp(self):
        app = create_app(scenario())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(json.dumps({"cmd": "takeover"}))
                ws.send_text(
                    json.dumps(
                        {
                            "cmd": "set_action",
                            "action": {"f1": 900, "f2": -900, "f3": 900,
                                       "alpha1": 3.0, "alpha2": -3.0},
                        }
                    )
                )
                for _ in range(200):
                    msg = json.loads(ws.receive_text())
                    if msg.get("mode") == "human":
                        a = msg["action"]
                        values = [a["f1"], a["f2"], a["f3"], a["alpha1"], a["alpha2"]]
                        assert np.all(np.array(values) >= ACTION_LOW - 1e-12)
                        assert np.all(np.array(values) <= ACTION_HIGH + 1e-12)
                        if a["f1"] == 100.0:
                            break
                else:
                    pytest.fail("clamped human action never observed")

    def test_unknown_command_reply_keeps_session(self):
        app = create_app(scenario())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text('{"cmd": "warp"}')
                saw_err = False
                for _ in range(40):
                    msg = json.loads(ws.receive_text())
                    if msg.get("err") == "unknown_command":
                        saw_err = True
                    elif saw_err and "step" in msg:
                        break
                assert saw_err

    def test_pause_resume_contiguous(self):
        import time

        app = create_app(scenario())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                first = read_frames(ws, 3)
                ws.send_text(json.dumps({"cmd": "pause"}))
                time.sleep(0.4)
                ws.send_text(json.dumps({"cmd": "resume"}))
                rest = read_frames(ws, 10)
        steps = [f["step"] for f in first + rest if "step" in f]
        assert steps == list(range(steps[0], steps[0] + len(steps)))
