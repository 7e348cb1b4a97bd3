"""Feature attributions from the active leaf's coefficients.

Raw attributions are signed per (output, feature) shares: weight times value,
L1-normalized per output with the intercept excluded. Combined importances
sum absolute shares over the outputs; compressed importances group them into
the four operator-facing quantities (distance to berth, velocity, obstacle,
heading). When an output's normalizer is zero its row is all zeros; when that
holds for every output the frame is flagged degenerate — a constant leaf
admits no attribution, and downstream UIs must say so rather than invent one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .harbor import CONTACT_INDEX, FEATURE_NAMES

N_FEATURES = len(FEATURE_NAMES)
N_OUTPUTS = 5

COMPRESSION_GROUPS: Dict[str, tuple] = {
    "distance": (0, 1),  # body-frame offsets to the berthing point
    "velocity": (3, 4, 5),
    "obstacle": (7, 8),
    "heading": (2,),
}


@dataclass
class AttributionFrame:
    raw: np.ndarray  # (5, 9) signed shares
    combined: np.ndarray  # (9,) non-negative
    compressed: Dict[str, float]
    degenerate: bool
    leaf_id: Optional[int] = None
    step: Optional[int] = None

    def to_json_dict(self) -> Dict:
        return {
            "raw": self.raw.tolist(),
            "combined": self.combined.tolist(),
            "compressed": {k: self.compressed[k] for k in COMPRESSION_GROUPS},
            "degenerate": self.degenerate,
            "leaf_id": self.leaf_id,
        }


def attributions(W: np.ndarray, x) -> np.ndarray:
    """Signed, per-output L1-normalized shares of each feature.

    share[a, F] = w[a, F] * x[F] / sum_f |w[a, f] * x[f]|, intercept excluded.
    Outputs whose normalizer is zero get an all-zero row.
    """
    W = np.asarray(W, dtype=float)
    x = np.asarray(x, dtype=float).reshape(N_FEATURES)
    contrib = W[:, :N_FEATURES] * x
    denom = np.sum(np.abs(contrib), axis=1, keepdims=True)
    raw = np.divide(contrib, denom, out=np.zeros_like(contrib), where=denom > 0.0)
    return raw


def combine(raw: np.ndarray) -> np.ndarray:
    """Overall importance per feature: absolute shares summed over outputs."""
    return np.sum(np.abs(np.asarray(raw, dtype=float)), axis=0)


def compress(combined: np.ndarray) -> Dict[str, float]:
    """The four operator-facing importance groups.

    The contact flag belongs to no group; its column is always zero because
    the flag is excluded from the leaf regressions.
    """
    combined = np.asarray(combined, dtype=float)
    return {
        name: float(np.sum(combined[list(cols)]))
        for name, cols in COMPRESSION_GROUPS.items()
    }


def attribution_frame(W: np.ndarray, x, leaf_id: Optional[int] = None,
                      step: Optional[int] = None) -> AttributionFrame:
    """Full raw/combined/compressed frame for one prediction."""
    raw = attributions(W, x)
    comb = combine(raw)
    return AttributionFrame(
        raw=raw,
        combined=comb,
        compressed=compress(comb),
        degenerate=not np.any(raw),
        leaf_id=leaf_id,
        step=step,
    )
