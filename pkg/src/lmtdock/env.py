"""Episode stepping: one owner for all mutable simulation state.

EpisodeEngine drives the vessel with a controller, optionally shadows it
with a surrogate tree (predictions and attributions recorded, never applied),
evaluates the reward on each post-step state, and detects termination. Both
the offline rollout harness and the live stream service step through this
class, so a served session with no human commands reproduces an offline
rollout exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .explain import AttributionFrame, attribution_frame
from .harbor import HarborGeometry, StateVector, featurize
from .policy import Action, clamp, denormalize
from .reward import RewardComponents, RewardParams, reward
from .tree.model import LeafNode, LmTree
from .vessel import Pose, Velocity, VesselModel, step as integrate, thrust_allocation


@dataclass(frozen=True)
class EpisodeParams:
    h: float = 0.5  # integrator step, seconds
    max_steps: int = 2500
    pos_tol: float = 2.0  # meters to the berthing point
    head_tol: float = math.radians(5.0)
    vel_tol: float = 0.2  # m/s planar speed
    hold_steps: int = 20  # consecutive in-tolerance steps to count as berthed

    def to_metadata(self) -> dict:
        return {
            "h": self.h,
            "max_steps": self.max_steps,
            "pos_tol": self.pos_tol,
            "head_tol": self.head_tol,
            "vel_tol": self.vel_tol,
            "hold_steps": self.hold_steps,
        }


@dataclass(frozen=True)
class Environment:
    geom: HarborGeometry
    model: VesselModel
    reward_params: RewardParams = RewardParams()
    params: EpisodeParams = EpisodeParams()


class StepRecord(NamedTuple):
    step: int
    t: float  # sim time after the step
    state: StateVector  # what the controller saw
    controller_action: Action
    active_action: Action
    surrogate_action: Optional[Action]
    attribution: Optional[AttributionFrame]
    forces: Tuple[float, float, float]  # of the active action (kN, kN, kN m)
    reward: RewardComponents  # evaluated on the post-step state
    pose: Pose  # post-step
    velocity: Velocity  # post-step
    state_after: StateVector
    control_mode: str  # "auto" | "human"
    done: bool
    outcome: Optional[str]


OUTCOMES = ("reached_berth", "collided", "timeout", "diverged")


class EpisodeEngine:
    """Steps a single episode; owns the pose/velocity/termination state."""

    def __init__(
        self,
        policy,
        env: Environment,
        start_pose: Pose,
        start_vel: Velocity = Velocity(0.0, 0.0, 0.0),
        shadow_tree: Optional[LmTree] = None,
    ):
        self.policy = policy
        self.env = env
        self.shadow_tree = shadow_tree
        self.pose = start_pose
        self.vel = start_vel
        self.step_index = 0
        self._state = featurize(start_pose, start_vel, env.geom)
        self._d_prev = math.hypot(self._state.x_err, self._state.y_err)
        self._hold = 0
        self.done = False
        self.outcome: Optional[str] = None

    def observe(self) -> StateVector:
        return self._state

    def _shadow(self, state: StateVector):
        if self.shadow_tree is None:
            return None, None
        x = state.as_array()
        leaf_id = self.shadow_tree.active_leaf(x)
        leaf: LeafNode = self.shadow_tree.nodes[leaf_id]
        action = clamp(Action(*denormalize(leaf.W[:, :9] @ x + leaf.W[:, 9])))
        frame = attribution_frame(leaf.W, x, leaf_id=leaf_id, step=self.step_index)
        return action, frame

    def step(self, override_action: Optional[Action] = None) -> StepRecord:
        """Advance one step; the override (if any) replaces the controller."""
        if self.done:
            raise RuntimeError("episode already finished")
        p = self.env.params
        state = self._state
        controller_action = clamp(self.policy.predict(state.as_array()))
        if override_action is None:
            active = controller_action
            mode = "auto"
        else:
            active = clamp(override_action)
            mode = "human"
        surrogate_action, attribution = self._shadow(state)

        forces = thrust_allocation(active, self.env.model.thrusters)
        self.pose, self.vel = integrate(self.pose, self.vel, forces, p.h, self.env.model)
        self.step_index += 1

        raw = np.array([*self.pose, *self.vel])
        if not np.all(np.isfinite(raw)):
            self.done = True
            self.outcome = "diverged"
            state_after = state  # last finite observation
            comps = RewardComponents(0.0, 0.0, 0.0, 0.0, 0.0)
        else:
            state_after = featurize(self.pose, self.vel, self.env.geom)
            d_now = math.hypot(state_after.x_err, state_after.y_err)
            d_dot = (d_now - self._d_prev) / p.h
            self._d_prev = d_now
            comps = reward(
                state_after.x_err,
                state_after.y_err,
                state_after.psi_err,
                int(state_after.contact),
                state_after.d_obs,
                d_dot,
                self.env.reward_params,
            )
            if state_after.contact:
                self.done = True
                self.outcome = "collided"
            else:
                in_tolerance = (
                    d_now < p.pos_tol
                    and abs(state_after.psi_err) < p.head_tol
                    and math.hypot(state_after.u, state_after.v) < p.vel_tol
                )
                self._hold = self._hold + 1 if in_tolerance else 0
                if self._hold >= p.hold_steps:
                    self.done = True
                    self.outcome = "reached_berth"
                elif self.step_index >= p.max_steps:
                    self.done = True
                    self.outcome = "timeout"
            self._state = state_after

        return StepRecord(
            step=self.step_index - 1,
            t=self.step_index * p.h,
            state=state,
            controller_action=controller_action,
            active_action=active,
            surrogate_action=surrogate_action,
            attribution=attribution,
            forces=forces,
            reward=comps,
            pose=self.pose,
            velocity=self.vel,
            state_after=state_after,
            control_mode=mode,
            done=self.done,
            outcome=self.outcome,
        )
