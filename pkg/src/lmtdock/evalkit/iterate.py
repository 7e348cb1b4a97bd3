"""Legacy iterative data sampling: alternate tree-driven runs and rebuilds."""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from ..env import Environment
from ..policy import normalize
from ..tree.build import BuildConfig, grow
from ..tree.model import LmTree
from ..tree.surrogate import TreePolicy
from .rollout import Dataset, EmptyDatasetError, build_dataset, rollout
from .starts import Start


def iterative_sampling_build(
    policy,
    env: Environment,
    starts: Sequence[Start],
    config: BuildConfig,
    max_it: int,
) -> Tuple[List[LmTree], List[int]]:
    """Build a tree per iteration on an append-only, resampled dataset.

    Iteration 1 samples with the black-box policy itself (there is no tree
    yet), making a one-iteration run identical to build_dataset + grow. Later
    iterations drive the environment with the previous tree so the dataset
    accumulates states the surrogate actually visits, each labeled with the
    black-box policy's action. Returns every iteration's tree plus the
    dataset size after each iteration so a validation set can pick a winner.
    """
    if max_it < 1:
        raise ValueError("max_it must be >= 1")
    xs: List[np.ndarray] = []
    ys: List[np.ndarray] = []
    trees: List[LmTree] = []
    sizes: List[int] = []
    for it in range(max_it):
        if it == 0:
            ds = build_dataset(policy, starts, env)
            xs.append(ds.X)
            ys.append(ds.Y)
        else:
            driver = TreePolicy(trees[-1])
            new_x = []
            for s in starts:
                ep = rollout(driver, env, s)
                if ep.diverged or not ep.steps:
                    continue
                new_x.append(ep.states())
            if new_x:
                visited = np.vstack(new_x)
                labels = np.array([policy.predict(x) for x in visited], dtype=float)
                xs.append(visited)
                ys.append(normalize(labels))
        X = np.vstack(xs)
        Y = np.vstack(ys)
        if not len(X):
            raise EmptyDatasetError("no rows accumulated")
        trees.append(grow(X, Y, config))
        sizes.append(len(X))
    return trees, sizes
