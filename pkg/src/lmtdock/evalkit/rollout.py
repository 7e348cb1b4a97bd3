"""Closed-loop episodes and dataset assembly."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..env import Environment, EpisodeEngine, StepRecord
from ..harbor import FEATURE_NAMES
from ..policy import normalize
from ..tree.model import LmTree
from ..vessel import Pose, Velocity
from .starts import Start


@dataclass
class Episode:
    start_pose: Pose
    start_vel: Velocity
    steps: List[StepRecord]
    outcome: str
    cumulative_reward: float
    h: float

    @property
    def diverged(self) -> bool:
        return self.outcome == "diverged"

    def states(self) -> np.ndarray:
        return np.array([s.state for s in self.steps], dtype=float)

    def controller_actions(self) -> np.ndarray:
        return np.array([s.controller_action for s in self.steps], dtype=float)

    def reward_series(self) -> np.ndarray:
        return np.array([s.reward.total for s in self.steps], dtype=float)


def rollout(
    policy,
    env: Environment,
    start: Start,
    shadow_tree: Optional[LmTree] = None,
) -> Episode:
    """Run one episode to termination under the policy's clamped actions."""
    pose, vel = start
    engine = EpisodeEngine(policy, env, pose, vel, shadow_tree=shadow_tree)
    steps: List[StepRecord] = []
    if engine.observe().contact:
        return Episode(pose, vel, steps, "collided", 0.0, env.params.h)
    total = 0.0
    while not engine.done:
        rec = engine.step()
        steps.append(rec)
        total += rec.reward.total
    return Episode(pose, vel, steps, engine.outcome, total, env.params.h)


@dataclass
class Dataset:
    """Rows of (state features, normalized controller actions)."""

    X: np.ndarray  # (n, 9)
    Y: np.ndarray  # (n, 5) in [-1, 1]
    feature_mean: np.ndarray = field(default=None)
    feature_std: np.ndarray = field(default=None)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[1] != len(FEATURE_NAMES):
            raise ValueError("feature matrix must be (n, 9)")
        if self.Y.shape != (self.X.shape[0], 5):
            raise ValueError("target matrix must be (n, 5)")
        if self.X.shape[0] and np.max(np.abs(self.Y)) > 1.0 + 1e-9:
            raise ValueError("targets must be normalized to [-1, 1]")
        if self.feature_mean is None:
            self.feature_mean = self.X.mean(axis=0) if len(self.X) else np.zeros(9)
        if self.feature_std is None:
            std = self.X.std(axis=0) if len(self.X) else np.ones(9)
            self.feature_std = np.where(std > 0.0, std, 1.0)

    def __len__(self) -> int:
        return self.X.shape[0]


class EmptyDatasetError(RuntimeError):
    pass


def episodes_to_dataset(episodes: Sequence[Episode]) -> Dataset:
    """Stack (state, normalized controller action) pairs over all steps."""
    xs, ys = [], []
    for ep in episodes:
        if ep.diverged or not ep.steps:
            continue
        xs.append(ep.states())
        ys.append(normalize(ep.controller_actions()))
    if not xs:
        raise EmptyDatasetError("no usable episode steps (all diverged or empty)")
    return Dataset(X=np.vstack(xs), Y=np.vstack(ys))


def _rollout_rows(args):
    policy, env, start = args
    ep = rollout(policy, env, start)
    if ep.diverged or not ep.steps:
        return None
    return ep.states(), normalize(ep.controller_actions())


def build_dataset(policy, starts: Sequence[Start], env: Environment,
                  return_episodes: bool = False, jobs: int = 1):
    """Roll the policy out from every start and collect labeled rows.

    Episodes are independent, so jobs > 1 fans the rollouts over processes;
    rows keep start order either way. Parallel mode returns rows only.
    """
    if not starts:
        raise ValueError("need at least one starting point")
    if jobs > 1 and not return_episodes:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_rollout_rows, [(policy, env, s) for s in starts],
                                    chunksize=max(1, len(starts) // (4 * jobs))))
        pairs = [r for r in results if r is not None]
        if not pairs:
            raise EmptyDatasetError("no usable episode steps (all diverged or empty)")
        return Dataset(X=np.vstack([p[0] for p in pairs]),
                       Y=np.vstack([p[1] for p in pairs]))
    episodes = [rollout(policy, env, s) for s in starts]
    ds = episodes_to_dataset(episodes)
    return (ds, episodes) if return_episodes else ds


# per-feature half-widths for the jittered replicas (meters, radians, m/s)
AUGMENT_SCALE = np.array([1.0, 1.0, 0.02, 0.1, 0.1, 0.006, 0.0, 1.0, 0.03])


def augment_dataset(ds: Dataset, policy, fraction: float = 0.5,
                    scale: np.ndarray = AUGMENT_SCALE, seed: int = 0) -> Dataset:
    """Append policy-labeled jittered replicas of a sample of rows.

    Rollouts of a deterministic controller barely excite the velocity and
    rate channels around its own trajectory, leaving those regression slopes
    unidentifiable; small perturbations around visited states (labeled by
    re-invoking the policy, which is a pure function) restore local
    identifiability without running the simulator.
    """
    if not 0.0 <= fraction <= 2.0:
        raise ValueError("augment fraction must be in [0, 2]")
    n = int(len(ds) * fraction)
    if n == 0:
        return ds
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(ds), n, replace=n > len(ds))
    Xp = ds.X[pick] + rng.uniform(-1.0, 1.0, (n, ds.X.shape[1])) * scale
    Xp[:, 7] = np.maximum(Xp[:, 7], 0.0)  # obstacle distance stays nonnegative
    Yp = np.array([policy.predict(x) for x in Xp], dtype=float)
    return Dataset(X=np.vstack([ds.X, Xp]), Y=np.vstack([ds.Y, normalize(Yp)]))
