"""Build-time benchmark: plain greedy search versus ordered feature splitting."""

from __future__ import annotations

import statistics
import time
from dataclasses import replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..tree.build import DEFAULT_GROUPS, BuildConfig, grow
from .rollout import Dataset


def build_benchmark(
    dataset: Dataset,
    leaf_budgets: Sequence[int] = (10, 50),
    base_config: BuildConfig = None,
    repeats: int = 5,
    kernel_name: Optional[str] = None,
) -> List[Dict]:
    """Median wall-clock build times for plain vs ordered mode per budget.

    Median of `repeats` single-process builds with a warm cache; absolute
    times are hardware-bound, the plain/ordered ratio is the comparable
    quantity.
    """
    base = base_config or BuildConfig()
    rows: List[Dict] = []
    for leaves in leaf_budgets:
        for mode, groups in (("plain", ()), ("ofs", DEFAULT_GROUPS)):
            cfg = replace(base, max_leaves=leaves, ordered_groups=groups)
            times = []
            n_leaves = 0
            for _ in range(repeats):
                t0 = time.perf_counter()
                tree = grow(dataset.X, dataset.Y, cfg, kernel_name=kernel_name)
                times.append(time.perf_counter() - t0)
                n_leaves = tree.n_leaves
            rows.append(
                {
                    "mode": mode,
                    "leaf_budget": int(leaves),
                    "built_leaves": int(n_leaves),
                    "times_s": times,
                    "median_s": float(statistics.median(times)),
                    "rows": int(len(dataset)),
                }
            )
    return rows


def speedup_ratios(rows: List[Dict]) -> Dict[int, float]:
    """ofs/plain median ratio per leaf budget."""
    by_key = {(r["mode"], r["leaf_budget"]): r["median_s"] for r in rows}
    budgets = sorted({r["leaf_budget"] for r in rows})
    return {
        b: by_key[("ofs", b)] / by_key[("plain", b)]
        for b in budgets
        if ("ofs", b) in by_key and ("plain", b) in by_key
    }
