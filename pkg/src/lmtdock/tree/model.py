"""Linear model tree: univariate branch nodes, multi-output affine leaves.

Routing convention: x[feature] <= threshold goes left. Leaf coefficient
matrices are 5x10 (one row per output: 9 feature weights in state order plus
an intercept); the contact-flag column is always zero because that feature is
excluded from the regression.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Tuple, Union

import numpy as np

from ..harbor import CONTACT_INDEX, FEATURE_NAMES
from ..policy import ACTION_HIGH, ACTION_LOW, ACTION_NAMES

TREE_FORMAT = "lmtdock-tree"
TREE_VERSION = 1

N_FEATURES = len(FEATURE_NAMES)
N_OUTPUTS = len(ACTION_NAMES)


class TreeFormatError(ValueError):
    """Raised for malformed or version-incompatible tree files."""


@dataclass
class BranchNode:
    feature: int
    threshold: float
    left: int
    right: int

    def __post_init__(self):
        if self.feature == CONTACT_INDEX:
            raise ValueError("the contact flag is never a split feature")
        if not 0 <= self.feature < N_FEATURES:
            raise ValueError(f"split feature index {self.feature} out of range")


@dataclass
class LeafNode:
    W: np.ndarray  # (5, 10)
    n_samples: int
    loss: float

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        if self.W.shape != (N_OUTPUTS, N_FEATURES + 1):
            raise ValueError(f"leaf coefficient matrix must be {N_OUTPUTS}x{N_FEATURES + 1}")


Node = Union[BranchNode, LeafNode]


@dataclass
class LmTree:
    nodes: List[Node]
    root: int = 0
    feature_names: Tuple[str, ...] = FEATURE_NAMES
    output_names: Tuple[str, ...] = ACTION_NAMES
    output_low: np.ndarray = field(default_factory=lambda: ACTION_LOW.copy())
    output_high: np.ndarray = field(default_factory=lambda: ACTION_HIGH.copy())
    metadata: Dict = field(default_factory=dict)

    def predict(self, x) -> np.ndarray:
        """Route a single 9-feature vector to its leaf and evaluate it."""
        x = np.asarray(x, dtype=float)
        node = self.nodes[self.root]
        while isinstance(node, BranchNode):
            node = self.nodes[node.left if x[node.feature] <= node.threshold else node.right]
        return node.W[:, :N_FEATURES] @ x + node.W[:, N_FEATURES]

    def active_leaf(self, x) -> int:
        """Node id of the leaf a state routes to."""
        x = np.asarray(x, dtype=float)
        nid = self.root
        node = self.nodes[nid]
        while isinstance(node, BranchNode):
            nid = node.left if x[node.feature] <= node.threshold else node.right
            node = self.nodes[nid]
        return nid

    def predict_batch(self, X) -> np.ndarray:
        """Vectorized prediction for an (n, 9) matrix."""
        X = np.asarray(X, dtype=float)
        out = np.empty((X.shape[0], N_OUTPUTS))
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            nid, idx = stack.pop()
            if idx.size == 0:
                continue
            node = self.nodes[nid]
            if isinstance(node, LeafNode):
                out[idx] = X[idx] @ node.W[:, :N_FEATURES].T + node.W[:, N_FEATURES]
            else:
                mask = X[idx, node.feature] <= node.threshold
                stack.append((node.left, idx[mask]))
                stack.append((node.right, idx[~mask]))
        return out

    def leaf_ids(self) -> List[int]:
        return [i for i, n in enumerate(self.nodes) if isinstance(n, LeafNode)]

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_ids())

    def depths(self) -> Dict[int, int]:
        """Depth of every node (root = 0)."""
        out = {self.root: 0}
        stack = [self.root]
        while stack:
            nid = stack.pop()
            node = self.nodes[nid]
            if isinstance(node, BranchNode):
                out[node.left] = out[nid] + 1
                out[node.right] = out[nid] + 1
                stack.extend((node.left, node.right))
        return out


def tree_stats(tree: LmTree) -> Tuple[int, int, int]:
    """(leaf count, depth of the deepest node, depth of the shallowest leaf)."""
    depths = tree.depths()
    leaf_depths = [depths[i] for i in tree.leaf_ids()]
    return len(leaf_depths), max(depths.values()), min(leaf_depths)


def to_dict(tree: LmTree) -> Dict:
    nodes = []
    for node in tree.nodes:
        if isinstance(node, BranchNode):
            nodes.append(
                {
                    "kind": "branch",
                    "feature": node.feature,
                    "threshold": node.threshold,
                    "left": node.left,
                    "right": node.right,
                }
            )
        else:
            nodes.append(
                {
                    "kind": "leaf",
                    "w": node.W.tolist(),
                    "n_samples": node.n_samples,
                    "loss": node.loss,
                }
            )
    return {
        "format": TREE_FORMAT,
        "version": TREE_VERSION,
        "feature_names": list(tree.feature_names),
        "output_names": list(tree.output_names),
        "output_low": tree.output_low.tolist(),
        "output_high": tree.output_high.tolist(),
        "root": tree.root,
        "nodes": nodes,
        "metadata": tree.metadata,
    }


def serialize(tree: LmTree) -> bytes:
    """Versioned, lossless JSON encoding (stable key order)."""
    return json.dumps(to_dict(tree), sort_keys=True, separators=(",", ":")).encode()


def from_dict(raw: Dict) -> LmTree:
    if not isinstance(raw, dict) or raw.get("format") != TREE_FORMAT:
        raise TreeFormatError("not a model tree file")
    if raw.get("version") != TREE_VERSION:
        raise TreeFormatError(
            f"incompatible tree format version {raw.get('version')!r} (expected {TREE_VERSION})"
        )
    try:
        nodes: List[Node] = []
        for entry in raw["nodes"]:
            if entry["kind"] == "branch":
                nodes.append(
                    BranchNode(
                        feature=int(entry["feature"]),
                        threshold=float(entry["threshold"]),
                        left=int(entry["left"]),
                        right=int(entry["right"]),
                    )
                )
            elif entry["kind"] == "leaf":
                nodes.append(
                    LeafNode(
                        W=np.array(entry["w"], dtype=float),
                        n_samples=int(entry["n_samples"]),
                        loss=float(entry["loss"]),
                    )
                )
            else:
                raise TreeFormatError(f"unknown node kind {entry['kind']!r}")
        tree = LmTree(
            nodes=nodes,
            root=int(raw["root"]),
            feature_names=tuple(raw["feature_names"]),
            output_names=tuple(raw["output_names"]),
            output_low=np.array(raw["output_low"], dtype=float),
            output_high=np.array(raw["output_high"], dtype=float),
            metadata=raw.get("metadata", {}),
        )
    except TreeFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise TreeFormatError(f"malformed tree file: {exc}") from exc
    _validate(tree)
    return tree


def deserialize(data: bytes) -> LmTree:
    try:
        raw = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise TreeFormatError(f"tree file is not valid JSON: {exc}") from exc
    return from_dict(raw)


def save(tree: LmTree, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(tree))


def load(path) -> LmTree:
    with open(path, "rb") as fh:
        return deserialize(fh.read())


def _validate(tree: LmTree) -> None:
    seen = set()
    stack = [tree.root]
    while stack:
        nid = stack.pop()
        if nid in seen or not 0 <= nid < len(tree.nodes):
            raise TreeFormatError("node graph is not a tree")
        seen.add(nid)
        node = tree.nodes[nid]
        if isinstance(node, BranchNode):
            stack.extend((node.left, node.right))
    if len(seen) != len(tree.nodes):
        raise TreeFormatError("unreachable nodes present")
