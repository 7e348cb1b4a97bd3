"""Run a fitted tree as a controller in its own right."""

from __future__ import annotations

import numpy as np

from ..policy import Action, clamp, denormalize
from .model import LmTree


class TreePolicy:
    """Closed-loop adapter: denormalized, clamped tree predictions."""

    name = "lmt"

    def __init__(self, tree: LmTree):
        self.tree = tree

    def predict(self, x) -> Action:
        z = self.tree.predict(np.asarray(x, dtype=float))
        return clamp(Action(*denormalize(z)))
