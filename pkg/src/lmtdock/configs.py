"""Load/save the JSON configuration artifacts (harbor, vessel, reward, gains).

Defaults ship as package data. The dock shoreline planes and the hull
pentagon magnitudes follow the published harbor model; the outer closure
planes, berth rectangle placement, and the mass/damping/thruster numbers are
documented repository defaults, not measured data.
"""

from __future__ import annotations

import importlib.resources
import json
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .harbor import HarborGeometry
from .policy import BaselineGains
from .reward import RewardParams
from .vessel import Pose, Thruster, VesselModel

PathLike = Union[str, Path]


class ConfigError(ValueError):
    """Raised when a configuration file is missing keys or malformed."""


def _load_json(path: PathLike) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None


def _default_path(name: str) -> Path:
    return Path(importlib.resources.files("lmtdock.data") / name)


def load_harbor(path: Optional[PathLike] = None) -> HarborGeometry:
    raw = _load_json(path or _default_path("harbor.json"))
    try:
        bp = raw["berth_point"]
        return HarborGeometry(
            dock_A=np.array(raw["dock"]["A"], dtype=float),
            dock_b=np.array(raw["dock"]["b"], dtype=float),
            hull_A=np.array(raw["hull"]["A"], dtype=float),
            hull_b=np.array(raw["hull"]["b"], dtype=float),
            berth_A=np.array(raw["berth"]["A"], dtype=float),
            berth_b=np.array(raw["berth"]["b"], dtype=float),
            berth_point=Pose(float(bp["x"]), float(bp["y"]), float(bp["psi"])),
            hull_margin=float(raw.get("hull_margin", 1.10)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad harbor config: {exc}") from exc


def load_vessel(path: Optional[PathLike] = None) -> VesselModel:
    raw = _load_json(path or _default_path("vessel.json"))
    try:
        thrusters = tuple(
            Thruster(
                lx=float(t["lx"]),
                ly=float(t["ly"]),
                force_min=float(t["fmin"]),
                force_max=float(t["fmax"]),
                angle_fixed=float(t["angle_fixed"]) if "angle_fixed" in t else None,
            )
            for t in raw["thrusters"]
        )
        return VesselModel(
            mass_matrix=np.array(raw["M"], dtype=float),
            damping_matrix=np.array(raw["D"], dtype=float),
            thrusters=thrusters,
            current=np.array(raw.get("current", [0.0, 0.0]), dtype=float),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad vessel config: {exc}") from exc


def load_reward(path: Optional[PathLike] = None) -> RewardParams:
    raw = _load_json(path or _default_path("reward.json"))
    try:
        return RewardParams(**{k: float(v) for k, v in raw.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad reward config: {exc}") from exc


def load_baseline_gains(path: Optional[PathLike] = None) -> BaselineGains:
    raw = _load_json(path or _default_path("baseline.json"))
    try:
        return BaselineGains(**{k: float(v) for k, v in raw.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad baseline gains config: {exc}") from exc


def config_fingerprint(*objects) -> str:
    """Short stable hash of a set of config objects, stamped into artifacts."""
    import hashlib

    def encode(obj):
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if hasattr(obj, "_asdict"):
            return obj._asdict()
        if hasattr(obj, "__dict__"):
            return {k: encode(v) for k, v in vars(obj).items() if not k.startswith("_")}
        if isinstance(obj, (list, tuple)):
            return [encode(v) for v in obj]
        if isinstance(obj, dict):
            return {k: encode(v) for k, v in obj.items()}
        return obj

    payload = json.dumps([encode(o) for o in objects], sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]
