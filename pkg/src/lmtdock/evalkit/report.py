"""Static vector-graphic reports (SVG, byte-reproducible for fixed input)."""

from __future__ import annotations

import math
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from ..harbor import FEATURE_NAMES, HarborGeometry
from ..policy import ACTION_NAMES, normalize
from .fidelity import reward_comparison
from .rollout import Episode

# fixed hash salt + stripped date metadata make SVG output reproducible
matplotlib.rcParams["svg.hashsalt"] = "lmtdock"

_SAVE_KW = dict(format="svg", metadata={"Date": None})

ACTIVE_FEATURES = [i for i, n in enumerate(FEATURE_NAMES) if n != "contact"]


def _finish(fig, path) -> None:
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def developer_report(episode: Episode, path) -> None:
    """Three stacked panels: attributions, states, actions per step.

    The action panel overlays the controller (solid) and the surrogate
    (dashed) in normalized units; the shaded band is their difference.
    Requires the episode to carry per-step attribution frames (a shadowed
    rollout); an empty episode yields an empty-axes document.
    """
    fig, axes = plt.subplots(3, 1, figsize=(11, 12), sharex=True)
    ax_attr, ax_state, ax_act = axes
    ax_attr.set_title("feature attributions (combined importance)")
    ax_state.set_title("states")
    ax_act.set_title("actions: controller (solid) vs surrogate (dashed), gap shaded")
    ax_act.set_xlabel("step")

    if episode.steps:
        steps = np.arange(len(episode.steps))
        states = episode.states()
        for i in ACTIVE_FEATURES:
            ax_state.plot(steps, states[:, i], label=FEATURE_NAMES[i], linewidth=0.9)
        ax_state.legend(loc="upper right", fontsize=7, ncol=3)

        frames = [s.attribution for s in episode.steps]
        if all(f is not None for f in frames):
            combined = np.array([f.combined for f in frames])
            for i in ACTIVE_FEATURES:
                ax_attr.plot(steps, combined[:, i], label=FEATURE_NAMES[i], linewidth=0.9)
            degen = np.array([f.degenerate for f in frames])
            if degen.any():
                ax_attr.scatter(
                    steps[degen], np.zeros(int(degen.sum())), marker="x", s=12,
                    color="k", label="no attribution",
                )
            ax_attr.legend(loc="upper right", fontsize=7, ncol=3)

        policy_n = normalize(episode.controller_actions())
        colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
        for j, name in enumerate(ACTION_NAMES):
            ax_act.plot(steps, policy_n[:, j], color=colors[j % len(colors)],
                        linewidth=0.9, label=name)
        if all(s.surrogate_action is not None for s in episode.steps):
            surr_n = normalize(
                np.array([s.surrogate_action for s in episode.steps], dtype=float)
            )
            for j in range(len(ACTION_NAMES)):
                c = colors[j % len(colors)]
                ax_act.plot(steps, surr_n[:, j], color=c, linewidth=0.8, linestyle="--")
                ax_act.fill_between(steps, policy_n[:, j], surr_n[:, j], color=c, alpha=0.2)
        ax_act.set_ylim(-1.05, 1.05)
        ax_act.legend(loc="upper right", fontsize=7, ncol=5)

    fig.align_ylabels(axes)
    _finish(fig, path)


def _draw_harbor(ax, geom: HarborGeometry) -> None:
    dock = np.vstack([geom.dock_vertices, geom.dock_vertices[:1]])
    berth = np.vstack([geom.berth_vertices, geom.berth_vertices[:1]])
    # NED: plot east on the horizontal axis, north on the vertical
    ax.plot(dock[:, 1], dock[:, 0], color="k", linewidth=1.2, label="dock boundary")
    ax.plot(berth[:, 1], berth[:, 0], color="tab:green", linewidth=1.0, label="berth")
    ax.plot(geom.berth_point.y, geom.berth_point.x, marker="*", color="tab:green",
            markersize=10, linestyle="none", label="berthing point")
    ax.set_xlabel("east [m]")
    ax.set_ylabel("north [m]")
    ax.set_aspect("equal")


def plot_paths(
    episodes: Dict[str, Episode],
    geom: HarborGeometry,
    path,
    title: str = "closed-loop paths",
) -> None:
    """Trajectory overlay for several controllers from one starting point."""
    fig, ax = plt.subplots(figsize=(9, 7))
    _draw_harbor(ax, geom)
    for name, ep in sorted(episodes.items()):
        if ep.steps:
            track = np.array([s.pose[:2] for s in ep.steps])
            track = np.vstack([[ep.start_pose.x, ep.start_pose.y], track])
        else:
            track = np.array([[ep.start_pose.x, ep.start_pose.y]])
        ax.plot(track[:, 1], track[:, 0], linewidth=1.1, label=f"{name} ({ep.outcome})")
        ax.plot(track[0, 1], track[0, 0], marker="o", markersize=4, linestyle="none",
                color=ax.lines[-1].get_color())
    ax.legend(loc="best", fontsize=8)
    ax.set_title(title)
    _finish(fig, path)


def plot_rewards(ep_a: Episode, ep_b: Episode, labels: Tuple[str, str], path) -> None:
    """Per-step reward overlay plus the cumulative totals."""
    cmp = reward_comparison(ep_a, ep_b)
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.plot(cmp["per_step_a"], label=f"{labels[0]} (cum {cmp['cumulative_a']:.1f})",
            linewidth=0.9)
    ax.plot(cmp["per_step_b"], label=f"{labels[1]} (cum {cmp['cumulative_b']:.1f})",
            linewidth=0.9)
    ax.set_xlabel("step")
    ax.set_ylabel("reward")
    ax.set_title("per-step reward from a shared starting point")
    ax.legend(loc="best", fontsize=8)
    _finish(fig, path)


def plot_forces(force_cmp: Dict, path) -> None:
    """Net force/moment of recorded vs surrogate actions over an episode."""
    series = force_cmp["series"]
    fig, axes = plt.subplots(3, 1, figsize=(10, 8), sharex=True)
    names = ("Fx [kN]", "Fy [kN]", "T [kN m]")
    for k, ax in enumerate(axes):
        ax.plot([s["policy"][k] for s in series], linewidth=0.9, label="controller")
        ax.plot([s["surrogate"][k] for s in series], linewidth=0.8, linestyle="--",
                label="surrogate")
        ax.set_ylabel(names[k])
    axes[0].set_title("net forces and moment of predicted actions")
    axes[0].legend(loc="best", fontsize=8)
    axes[-1].set_xlabel("step")
    _finish(fig, path)
