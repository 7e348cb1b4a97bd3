"""Live docking session: streams per-step frames, accepts interventions.

One simulation loop owns all mutable episode state. Clients connect over a
WebSocket, receive every frame as JSON, and may send commands (pause, resume,
takeover, release, set_action, set_speed) that are applied at the next step
boundary in arrival order. The surrogate keeps shadowing (and explaining)
even while a human drives. With no commands the served trajectory reproduces
an offline rollout exactly, because both step through the same engine.
"""

from __future__ import annotations

import asyncio
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Set

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from . import configs
from .env import Environment, EpisodeEngine, EpisodeParams, StepRecord
from .policy import Action, BaselinePolicy, MlpPolicy, clamp
from .tree import model as tree_model
from .tree.surrogate import TreePolicy
from .vessel import Pose, Velocity

SCHEMA_VERSION = 1
KNOWN_COMMANDS = ("pause", "resume", "takeover", "release", "set_action", "set_speed")


@dataclass
class ScenarioConfig:
    harbor_path: Optional[str] = None
    vessel_path: Optional[str] = None
    reward_path: Optional[str] = None
    baseline_path: Optional[str] = None
    policy: str = "baseline"  # "baseline" or a weights-file path
    tree_path: Optional[str] = None
    start_seed: int = 0
    start_index: int = 0
    params: EpisodeParams = field(default_factory=EpisodeParams)
    realtime_factor: float = 1.0  # 0 = unthrottled
    start_paused: bool = False  # wait for a resume command before stepping
    console_dir: Optional[str] = None

    def describe(self) -> Dict:
        return {
            "harbor": self.harbor_path or "default",
            "vessel": self.vessel_path or "default",
            "reward": self.reward_path or "default",
            "policy": self.policy,
            "tree": self.tree_path,
            "start_seed": self.start_seed,
            "start_index": self.start_index,
            "params": self.params.to_metadata(),
            "realtime_factor": self.realtime_factor,
            "schema_version": SCHEMA_VERSION,
        }


def encode_frame(rec: StepRecord) -> Dict:
    """Versioned frame message; the active action is what moved the vessel."""
    frame = {
        "v": SCHEMA_VERSION,
        "t": rec.t,
        "step": rec.step,
        "pose": {"x": rec.pose.x, "y": rec.pose.y, "psi": rec.pose.psi},
        "state": list(rec.state),
        "action": dict(zip(("f1", "f2", "f3", "alpha1", "alpha2"), rec.active_action)),
        "controller": dict(
            zip(("f1", "f2", "f3", "alpha1", "alpha2"), rec.controller_action)
        ),
        "forces": {"fx": rec.forces[0], "fy": rec.forces[1], "torque": rec.forces[2]},
        "reward": {
            "total": rec.reward.total,
            "r_dd": rec.reward.r_dd,
            "r_psi": rec.reward.r_psi,
            "r_obs": rec.reward.r_obs,
            "r_ddot": rec.reward.r_ddot,
        },
        "mode": rec.control_mode,
        "attr": rec.attribution.to_json_dict() if rec.attribution is not None else None,
    }
    if rec.surrogate_action is not None:
        frame["surrogate"] = dict(
            zip(("f1", "f2", "f3", "alpha1", "alpha2"), rec.surrogate_action)
        )
    if rec.done:
        frame["outcome"] = rec.outcome
    return frame


def parse_command(text: str):
    """Decode one command message; returns (command dict | None, error | None)."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError:
        return None, "bad_json"
    if not isinstance(raw, dict) or "cmd" not in raw:
        return None, "bad_json"
    if raw["cmd"] not in KNOWN_COMMANDS:
        return None, "unknown_command"
    return raw, None


class LiveSession:
    """Owns the engine and applies commands at step boundaries."""

    def __init__(self, scenario: ScenarioConfig):
        self.scenario = scenario
        geom = configs.load_harbor(scenario.harbor_path)
        model = configs.load_vessel(scenario.vessel_path)
        reward_params = configs.load_reward(scenario.reward_path)
        env = Environment(
            geom=geom, model=model, reward_params=reward_params, params=scenario.params
        )
        if scenario.policy == "baseline":
            policy = BaselinePolicy(
                configs.load_baseline_gains(scenario.baseline_path), model.thrusters
            )
        else:
            policy = MlpPolicy.from_file(scenario.policy)
        tree = tree_model.load(scenario.tree_path) if scenario.tree_path else None

        from .evalkit.starts import gen_starting_points

        starts = gen_starting_points(
            scenario.start_index + 1, seed=scenario.start_seed, geom=geom
        )
        pose, vel = starts[scenario.start_index]
        self.engine = EpisodeEngine(policy, env, pose, vel, shadow_tree=tree)
        self.mode = "auto"
        # what the mode will be once queued commands apply; lets a client
        # send takeover and set_action back-to-back without a race
        self.command_mode = "auto"
        self.paused = scenario.start_paused
        self.realtime_factor = scenario.realtime_factor
        self.held_action: Optional[Action] = None
        self.last_active: Optional[Action] = None
        self.commands: asyncio.Queue = asyncio.Queue()
        self.clients: Set[asyncio.Queue] = set()
        self.finished = asyncio.Event()
        self.outcome: Optional[str] = None

    # -- command side -------------------------------------------------
    def submit(self, command: Dict) -> Dict:
        """Validate a command; state changes are queued for the loop."""
        cmd = command["cmd"]
        if cmd == "takeover":
            self.command_mode = "human"
        elif cmd == "release":
            self.command_mode = "auto"
        if cmd == "set_action":
            if self.command_mode != "human":
                return {"err": "not_in_takeover"}
            try:
                action = clamp(
                    Action(*(float(command["action"][k]) for k in
                             ("f1", "f2", "f3", "alpha1", "alpha2")))
                )
            except (KeyError, TypeError, ValueError):
                return {"err": "bad_action"}
            self.commands.put_nowait(("set_action", action))
            return {"ok": cmd}
        if cmd == "set_speed":
            try:
                factor = float(command["factor"])
            except (KeyError, TypeError, ValueError):
                return {"err": "bad_factor"}
            if factor < 0.0 or not math.isfinite(factor):
                return {"err": "bad_factor"}
            self.commands.put_nowait(("set_speed", factor))
            return {"ok": cmd}
        self.commands.put_nowait((cmd, None))
        return {"ok": cmd}

    def _apply_pending(self) -> None:
        while True:
            try:
                cmd, payload = self.commands.get_nowait()
            except asyncio.QueueEmpty:
                return
            if cmd == "pause":
                self.paused = True
            elif cmd == "resume":
                self.paused = False
            elif cmd == "takeover":
                if self.mode != "human":
                    self.mode = "human"
                    self.held_action = self.last_active  # zero-order hold
            elif cmd == "release":
                self.mode = "auto"
                self.held_action = None
            elif cmd == "set_action":
                if self.mode == "human":
                    self.held_action = payload
            elif cmd == "set_speed":
                self.realtime_factor = payload

    # -- frame side ----------------------------------------------------
    def attach(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue(maxsize=512)
        self.clients.add(q)
        return q

    def detach(self, q: asyncio.Queue) -> None:
        self.clients.discard(q)

    def _broadcast(self, message: Dict) -> None:
        for q in self.clients:
            if q.full():
                try:
                    q.get_nowait()  # drop the oldest; a slow client never stalls us
                except asyncio.QueueEmpty:
                    pass
            q.put_nowait(message)

    async def run(self) -> None:
        engine = self.engine
        h = engine.env.params.h
        try:
            while not engine.done:
                self._apply_pending()
                if self.paused:
                    await asyncio.sleep(0.02)
                    continue
                override = self.held_action if self.mode == "human" else None
                rec = engine.step(override_action=override)
                self.last_active = rec.active_action
                self._broadcast(encode_frame(rec))
                if self.realtime_factor > 0.0:
                    await asyncio.sleep(h / self.realtime_factor)
                else:
                    await asyncio.sleep(0)
            self.outcome = engine.outcome
        finally:
            self._broadcast({"v": SCHEMA_VERSION, "done": True, "outcome": self.outcome})
            self.finished.set()


def create_app(scenario: ScenarioConfig) -> FastAPI:
    from contextlib import asynccontextmanager

    session = LiveSession(scenario)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(session.run())
        yield
        task.cancel()

    app = FastAPI(title="lmtdock live session", lifespan=lifespan)
    app.state.session = session

    @app.get("/health")
    async def health() -> Dict:
        return {"status": "ok", "finished": session.finished.is_set()}

    @app.get("/scenario")
    async def scenario_info() -> Dict:
        geom = session.engine.env.geom
        info = scenario.describe()
        info["geometry"] = {
            "dock": geom.dock_vertices.tolist(),
            "berth": geom.berth_vertices.tolist(),
            "hull": (geom.hull_body_vertices * geom.hull_margin).tolist(),
            "berth_point": {
                "x": geom.berth_point.x,
                "y": geom.berth_point.y,
                "psi": geom.berth_point.psi,
            },
        }
        info["thrusters"] = [
            {"lx": t.lx, "ly": t.ly, "fmin": t.force_min, "fmax": t.force_max,
             "fixed_angle": t.angle_fixed}
            for t in session.engine.env.model.thrusters
        ]
        return info

    @app.websocket("/ws")
    async def websocket_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        queue = session.attach()

        async def pump_frames() -> None:
            while True:
                frame = await queue.get()
                await ws.send_text(json.dumps(frame))

        async def pump_commands() -> None:
            while True:
                text = await ws.receive_text()
                command, err = parse_command(text)
                if err is not None:
                    await ws.send_text(json.dumps({"err": err}))
                    continue
                await ws.send_text(json.dumps(session.submit(command)))

        try:
            frames = asyncio.create_task(pump_frames())
            commands = asyncio.create_task(pump_commands())
            done, pending = await asyncio.wait(
                (frames, commands), return_when=asyncio.FIRST_EXCEPTION
            )
            for task in pending:
                task.cancel()
        except WebSocketDisconnect:
            pass
        finally:
            session.detach(queue)

    console = scenario.console_dir or str(
        Path(__file__).resolve().parents[2] / "frontend" / "dist"
    )
    if Path(console).is_dir():
        app.mount("/console", StaticFiles(directory=console, html=True), name="console")
    return app


def serve(scenario: ScenarioConfig, host: str = "127.0.0.1", port: int = 8700) -> None:
    """Run a blocking live session server."""
    import uvicorn

    uvicorn.run(create_app(scenario), host=host, port=port, log_level="warning")
