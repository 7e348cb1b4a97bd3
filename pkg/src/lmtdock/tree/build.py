"""Greedy best-first construction of linear model trees.

Split search scans a jittered threshold grid per candidate feature and scores
each candidate by the summed squared-error loss (averaged over the five
outputs) of ordinary-least-squares fits on the two sides. A split is valid
only when it strictly decreases the overall training loss and leaves both
children at least the minimum sample count. Ordered mode restricts each
node's candidate features to the first feature group (in the configured
order) that contains a valid split; the tree stops growing when no leaf
admits one or the leaf budget is reached.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .. import __version__
from ..harbor import CONTACT_INDEX, FEATURE_NAMES
from . import backend
from .model import BranchNode, LeafNode, LmTree

N_FEATURES = len(FEATURE_NAMES)
N_OUTPUTS = 5
# the contact flag is excluded from both splitting and the leaf regressions
SPLITTABLE_FEATURES = tuple(i for i in range(N_FEATURES) if i != CONTACT_INDEX)
REGRESSOR_COLS = SPLITTABLE_FEATURES
N_REGRESSORS = len(REGRESSOR_COLS) + 1  # + intercept
MIN_OLS_ROWS = N_FEATURES + 2

DEFAULT_GROUPS = ((0, 1, 2), (7, 8), (3, 4, 5))


class BuildError(ValueError):
    """Raised when a tree cannot be built from the given data/config."""


@dataclass(frozen=True)
class BuildConfig:
    max_leaves: int = 100
    min_samples: int = 50
    n_thresholds: int = 20
    jitter: float = 0.02
    ordered_groups: Tuple[Tuple[int, ...], ...] = DEFAULT_GROUPS  # () = plain mode
    rng_seed: int = 0
    min_loss_decrease: float = 0.0
    priority: str = "child_loss"  # paper formula; "loss_decrease" is the alternative

    def __post_init__(self):
        if self.max_leaves < 1:
            raise BuildError("max_leaves must be >= 1")
        if self.min_samples < MIN_OLS_ROWS:
            raise BuildError(f"min_samples must be >= {MIN_OLS_ROWS}")
        if self.n_thresholds < 2:
            raise BuildError("n_thresholds must be >= 2")
        if not 0.0 <= self.jitter < 0.5:
            raise BuildError("jitter must be in [0, 0.5)")
        if self.priority not in ("child_loss", "loss_decrease"):
            raise BuildError(f"unknown priority rule {self.priority!r}")
        for group in self.ordered_groups:
            for f in group:
                if f not in SPLITTABLE_FEATURES:
                    raise BuildError(f"feature {f} is not splittable")

    def to_metadata(self) -> dict:
        return {
            "max_leaves": self.max_leaves,
            "min_samples": self.min_samples,
            "n_thresholds": self.n_thresholds,
            "jitter": self.jitter,
            "ordered_groups": [list(g) for g in self.ordered_groups],
            "rng_seed": self.rng_seed,
            "min_loss_decrease": self.min_loss_decrease,
            "priority": self.priority,
        }


def regressor_matrix(X: np.ndarray) -> np.ndarray:
    """Feature columns used by the leaf regressions, plus the intercept."""
    X = np.asarray(X, dtype=float)
    Z = np.empty((X.shape[0], N_REGRESSORS))
    Z[:, :-1] = X[:, REGRESSOR_COLS]
    Z[:, -1] = 1.0
    return Z


def _intercept_only(Y: np.ndarray) -> np.ndarray:
    W = np.zeros((N_OUTPUTS, N_FEATURES + 1))
    W[:, N_FEATURES] = Y.mean(axis=0)
    return W


def _expand_solution(sol: np.ndarray) -> np.ndarray:
    """Map an (N_REGRESSORS, 5) solution into the 5x10 leaf layout."""
    W = np.zeros((N_OUTPUTS, N_FEATURES + 1))
    for k, col in enumerate(REGRESSOR_COLS):
        W[:, col] = sol[k]
    W[:, N_FEATURES] = sol[-1]
    return W


def fit_leaf(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Independent per-output least squares; intercept-only when degenerate.

    Falls back to column means when there are fewer rows than features plus
    two or the normal system is rank deficient.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise BuildError("cannot fit a leaf on an empty slice")
    if X.shape[0] < MIN_OLS_ROWS:
        return _intercept_only(Y)
    Z = regressor_matrix(X)
    sol, _, rank, _ = np.linalg.lstsq(Z, Y, rcond=None)
    if rank < N_REGRESSORS:
        return _intercept_only(Y)
    return _expand_solution(sol)


def leaf_loss(X: np.ndarray, Y: np.ndarray, W: np.ndarray) -> float:
    """Mean squared residual over rows and the 5 normalized outputs."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] == 0:
        raise BuildError("loss of an empty slice is undefined")
    pred = X @ W[:, :N_FEATURES].T + W[:, N_FEATURES]
    diff = pred - Y
    return float(np.mean(diff * diff))


def node_sse(X: np.ndarray, Y: np.ndarray, W: np.ndarray) -> float:
    """Squared-error sum over rows, averaged over the 5 outputs.

    This is the quantity the split search minimizes and the node priority
    maximizes; summed over leaves it is n times the tree's training loss, so
    strict per-split decrease makes the overall loss monotone.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    pred = X @ W[:, :N_FEATURES].T + W[:, N_FEATURES]
    diff = pred - Y
    return float(np.sum(diff * diff)) / N_OUTPUTS


def candidate_thresholds(values: np.ndarray, n_thresholds: int, jitter: float,
                         rng: np.random.Generator) -> np.ndarray:
    """Jittered evenly spaced interior thresholds over the value range.

    t_n = min + (n + r) * (max - min) / n_thresholds for n = 1..n_thresholds-1
    with r drawn per threshold from +/- jitter; constant features yield none.
    """
    vmin = float(np.min(values))
    vmax = float(np.max(values))
    if not vmax > vmin:
        return np.empty(0)
    n = np.arange(1, n_thresholds, dtype=float)
    r = rng.uniform(-jitter, jitter, size=n.size) if jitter > 0.0 else np.zeros(n.size)
    return vmin + (n + r) * (vmax - vmin) / n_thresholds


@dataclass
class SplitChoice:
    feature: int
    threshold: float
    sse_left: float
    sse_right: float
    w_left: np.ndarray
    w_right: np.ndarray
    left_idx: np.ndarray
    right_idx: np.ndarray

    @property
    def child_sse(self) -> float:
        return self.sse_left + self.sse_right


def _tri_unpack(packed: np.ndarray, d: int) -> np.ndarray:
    """(B, d(d+1)/2) packed upper triangles -> (B, d, d) symmetric matrices."""
    out = np.empty((packed.shape[0], d, d))
    iu = np.triu_indices(d)
    out[:, iu[0], iu[1]] = packed
    out[:, iu[1], iu[0]] = packed
    return out


def _ols_from_stats(szz: np.ndarray, szy: np.ndarray, syy: np.ndarray,
                    counts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Solve the packed normal equations; returns (solutions, summed SSE)."""
    B = szz.shape[0]
    A = _tri_unpack(szz, N_REGRESSORS)
    rhs = szy.reshape(B, N_REGRESSORS, N_OUTPUTS)
    sol = np.empty_like(rhs)
    try:
        sol[:] = np.linalg.solve(A, rhs)
        bad = ~np.all(np.isfinite(sol), axis=(1, 2))
    except np.linalg.LinAlgError:
        bad = np.ones(B, dtype=bool)
    if np.any(bad):
        for b in np.nonzero(bad)[0]:
            try:
                sol[b] = np.linalg.solve(A[b], rhs[b])
                if not np.all(np.isfinite(sol[b])):
                    raise np.linalg.LinAlgError
            except np.linalg.LinAlgError:
                # intercept-only: last regressor column is the ones column
                sol[b] = 0.0
                sol[b, -1] = rhs[b, -1] / counts[b]
    term2 = np.einsum("bkj,bkj->bj", sol, rhs)
    term3 = np.einsum("bkj,bkl,blj->bj", sol, A, sol)
    sse = np.maximum(syy - 2.0 * term2 + term3, 0.0).sum(axis=1)
    return sol, sse


def best_split(
    X: np.ndarray,
    Y: np.ndarray,
    Z: np.ndarray,
    idx: np.ndarray,
    features: Sequence[int],
    config: BuildConfig,
    rng: np.random.Generator,
    parent_sse: float,
    kernel=None,
) -> Optional[SplitChoice]:
    """Best (feature, threshold) over the grid, or None when nothing valid.

    Candidates leaving either side below min_samples are discarded; the
    argmin of summed child losses must strictly decrease the node's loss
    (min_loss_decrease is a per-row threshold on that decrease), verified on
    exact refits of both children. Ties break to the lowest feature index,
    then the smallest threshold.
    """
    if kernel is None:
        _, kernel = backend.get_kernel()
    n = idx.size
    if n < 2 * config.min_samples:
        return None
    best_lsum = np.inf
    best_feature = -1
    best_threshold = 0.0
    for f in features:
        vals = X[idx, f]
        ts = candidate_thresholds(vals, config.n_thresholds, config.jitter, rng)
        if ts.size == 0:
            continue
        order = np.argsort(vals, kind="stable")
        svals = vals[order]
        pos = np.searchsorted(svals, ts, side="right")
        ok = (pos >= config.min_samples) & (n - pos >= config.min_samples)
        if not np.any(ok):
            continue
        ts = ts[ok]
        pos = pos[ok]
        upos, first = np.unique(pos, return_index=True)
        bounds = np.append(upos, n).astype(np.int64)
        sorted_idx = np.ascontiguousarray(idx[order], dtype=np.int64)
        szz, szy, syy = kernel(Z, Y, sorted_idx, bounds)
        u = len(upos)
        left_cnt = upos.astype(float)
        right_cnt = (n - upos).astype(float)
        _, sse_l = _ols_from_stats(szz[:u], szy[:u], syy[:u], left_cnt)
        _, sse_r = _ols_from_stats(
            szz[-1] - szz[:u], szy[-1] - szy[:u], syy[-1] - syy[:u], right_cnt
        )
        lsum = (sse_l + sse_r) / N_OUTPUTS
        k = int(np.argmin(lsum))
        if lsum[k] < best_lsum:
            best_lsum = float(lsum[k])
            best_feature = f
            # smallest original threshold mapping to the winning partition
            best_threshold = float(ts[first[k]])
    if best_feature < 0:
        return None
    mask = X[idx, best_feature] <= best_threshold
    left_idx = idx[mask]
    right_idx = idx[~mask]
    w_left = fit_leaf(X[left_idx], Y[left_idx])
    w_right = fit_leaf(X[right_idx], Y[right_idx])
    sse_left = node_sse(X[left_idx], Y[left_idx], w_left)
    sse_right = node_sse(X[right_idx], Y[right_idx], w_right)
    decrease = parent_sse - (sse_left + sse_right)
    # roundoff-scale "decreases" on already-pure nodes are not strict
    # decreases; the dust floor scales with the node's squared target mass
    dust = 1e-12 * float(np.sum(Y[idx] * Y[idx])) / N_OUTPUTS
    if decrease <= dust or decrease < config.min_loss_decrease * n:
        return None
    return SplitChoice(
        feature=best_feature,
        threshold=best_threshold,
        sse_left=sse_left,
        sse_right=sse_right,
        w_left=w_left,
        w_right=w_right,
        left_idx=left_idx,
        right_idx=right_idx,
    )


@dataclass
class _LeafState:
    idx: np.ndarray
    W: np.ndarray
    sse: float
    split: Optional[SplitChoice] = None

    @property
    def loss(self) -> float:
        """Per-row, per-output mean squared residual (the reported loss)."""
        return self.sse / self.idx.size


def dataset_fingerprint(X: np.ndarray, Y: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(Y, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def grow(X: np.ndarray, Y: np.ndarray, config: BuildConfig = BuildConfig(),
         kernel_name: str = None) -> LmTree:
    """Best-first greedy growth up to the leaf budget.

    Each leaf carries its own precomputed best split; the next node to split
    maximizes (1 + r) times the summed child loss with fresh jitter per
    selection. Fixed seed, data, and kernel backend give identical trees.
    """
    X = np.ascontiguousarray(X, dtype=float)
    Y = np.ascontiguousarray(Y, dtype=float)
    if X.ndim != 2 or X.shape[1] != N_FEATURES:
        raise BuildError(f"feature matrix must be (n, {N_FEATURES})")
    if Y.shape != (X.shape[0], N_OUTPUTS):
        raise BuildError(f"target matrix must be (n, {N_OUTPUTS})")
    if X.shape[0] < 2 * config.min_samples:
        raise BuildError(
            f"need at least {2 * config.min_samples} rows, got {X.shape[0]}"
        )
    backend_name, kernel = backend.get_kernel(kernel_name)
    rng = np.random.default_rng(config.rng_seed)
    Z = regressor_matrix(X)

    def compute_split(state: _LeafState) -> Optional[SplitChoice]:
        if state.idx.size < 2 * config.min_samples:
            return None
        if config.ordered_groups:
            for group in config.ordered_groups:
                choice = best_split(
                    X, Y, Z, state.idx, sorted(group), config, rng, state.sse, kernel
                )
                if choice is not None:
                    return choice
            return None
        return best_split(
            X, Y, Z, state.idx, SPLITTABLE_FEATURES, config, rng, state.sse, kernel
        )

    idx0 = np.arange(X.shape[0])
    w0 = fit_leaf(X, Y)
    root = _LeafState(idx0, w0, node_sse(X, Y, w0))
    root.split = compute_split(root)
    nodes: List = [root]
    open_leaves = {0: root}

    while len(open_leaves) < config.max_leaves:
        candidates = sorted(i for i, s in open_leaves.items() if s.split is not None)
        if not candidates:
            break
        r = rng.uniform(-config.jitter, config.jitter, size=len(candidates))
        scores = np.empty(len(candidates))
        for j, nid in enumerate(candidates):
            split = open_leaves[nid].split
            base = (
                split.child_sse
                if config.priority == "child_loss"
                else open_leaves[nid].sse - split.child_sse
            )
            scores[j] = (1.0 + r[j]) * base
        chosen = candidates[int(np.argmax(scores))]
        state = open_leaves.pop(chosen)
        split = state.split
        left = _LeafState(split.left_idx, split.w_left, split.sse_left)
        right = _LeafState(split.right_idx, split.w_right, split.sse_right)
        left_id = len(nodes)
        right_id = len(nodes) + 1
        nodes[chosen] = BranchNode(
            feature=split.feature, threshold=split.threshold, left=left_id, right=right_id
        )
        nodes.extend((left, right))
        left.split = compute_split(left)
        right.split = compute_split(right)
        open_leaves[left_id] = left
        open_leaves[right_id] = right

    final_nodes: List = []
    for node in nodes:
        if isinstance(node, _LeafState):
            final_nodes.append(
                LeafNode(W=node.W, n_samples=int(node.idx.size), loss=node.loss)
            )
        else:
            final_nodes.append(node)
    metadata = {
        "config": config.to_metadata(),
        "dataset_fingerprint": dataset_fingerprint(X, Y),
        "n_rows": int(X.shape[0]),
        "kernel_backend": backend_name,
        "tool_version": __version__,
    }
    return LmTree(nodes=final_nodes, metadata=metadata)


def grow_best_of(X, Y, config: BuildConfig, n_restarts: int,
                 X_val=None, Y_val=None) -> Tuple[LmTree, List[float]]:
    """Build several jitter-randomized trees and keep the best.

    Seeds are config.rng_seed + i; selection uses validation loss when a
    validation split is given, else training loss. Returns (tree, losses).
    """
    if n_restarts < 1:
        raise BuildError("n_restarts must be >= 1")
    Xe = X if X_val is None else X_val
    Ye = Y if X_val is None else Y_val
    best_tree = None
    losses: List[float] = []
    for i in range(n_restarts):
        tree = grow(X, Y, replace(config, rng_seed=config.rng_seed + i))
        loss = float(np.mean((tree.predict_batch(Xe) - Ye) ** 2))
        if best_tree is None or loss < min(losses):
            best_tree = tree
        losses.append(loss)
    return best_tree, losses
