"""Controller contract and its two implementations.

A policy maps the 9-feature state vector to the 5 thruster commands
[f1, f2, f3, alpha1, alpha2]. Two implementations ship: feed-forward network
inference from a self-contained weights file, and a scripted
proportional-derivative guidance baseline so the whole pipeline runs without
trained weights. Both are deterministic and pure.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from .geometry import wrap_angle
from .vessel import Thruster

HALF_PI = math.pi / 2.0

ACTION_NAMES = ("f1", "f2", "f3", "alpha1", "alpha2")
ACTION_LOW = np.array([-70.0, -70.0, -50.0, -HALF_PI, -HALF_PI])
ACTION_HIGH = np.array([100.0, 100.0, 50.0, HALF_PI, HALF_PI])

WEIGHTS_MAGIC = b"LMTPOL\n"
WEIGHTS_VERSION = 1


class Action(NamedTuple):
    f1: float  # kN
    f2: float  # kN
    f3: float  # kN
    alpha1: float  # rad
    alpha2: float  # rad

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


class PolicyInputError(ValueError):
    """Raised when a policy receives a non-finite state."""


class WeightsFormatError(ValueError):
    """Raised for malformed, truncated, or wrong-version weights files."""


def clamp(action: Action) -> Action:
    """Clip every command to its physical range."""
    return Action(*np.clip(action.as_array(), ACTION_LOW, ACTION_HIGH))


def clamp_array(a: np.ndarray) -> np.ndarray:
    return np.clip(a, ACTION_LOW, ACTION_HIGH)


def normalize(action_values: np.ndarray) -> np.ndarray:
    """Affinely map physical commands to [-1, 1] per component."""
    return 2.0 * (np.asarray(action_values, dtype=float) - ACTION_LOW) / (ACTION_HIGH - ACTION_LOW) - 1.0


def denormalize(z: np.ndarray) -> np.ndarray:
    """Inverse of normalize."""
    return ACTION_LOW + (np.asarray(z, dtype=float) + 1.0) * 0.5 * (ACTION_HIGH - ACTION_LOW)


def _state_array(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise PolicyInputError("state vector contains non-finite values")
    return arr


@dataclass(frozen=True)
class MlpWeights:
    """Layer weights plus the input standardization baked into the file."""

    layers: Tuple[Tuple[np.ndarray, np.ndarray], ...]  # (weight out x in, bias out)
    hidden_activation: str = "relu"
    output_activation: str = "tanh"
    input_mean: np.ndarray = None
    input_scale: np.ndarray = None

    def __post_init__(self):
        in_dim = self.layers[0][0].shape[1]
        prev = in_dim
        for w, b in self.layers:
            if w.shape[1] != prev or b.shape != (w.shape[0],):
                raise WeightsFormatError("layer shapes do not chain")
            prev = w.shape[0]
        mean = self.input_mean if self.input_mean is not None else np.zeros(in_dim)
        scale = self.input_scale if self.input_scale is not None else np.ones(in_dim)
        if mean.shape != (in_dim,) or scale.shape != (in_dim,):
            raise WeightsFormatError("standardization constants do not match the input width")
        object.__setattr__(self, "input_mean", np.asarray(mean, dtype=float))
        object.__setattr__(self, "input_scale", np.asarray(scale, dtype=float))
        if self.hidden_activation != "relu" or self.output_activation != "tanh":
            raise WeightsFormatError("unsupported activation tags")

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[0]


def mlp_forward(weights: MlpWeights, x) -> np.ndarray:
    """Standardize, run the hidden rectifier layers, squash with tanh."""
    z = (_state_array(x) - weights.input_mean) / weights.input_scale
    for w, b in weights.layers[:-1]:
        z = np.maximum(w @ z + b, 0.0)
    w, b = weights.layers[-1]
    return np.tanh(w @ z + b)


def save_weights(path, weights: MlpWeights) -> None:
    """Write the binary weights file: magic, JSON header, flat float64 data."""
    arrays: List[np.ndarray] = []
    shapes = []
    for w, b in weights.layers:
        arrays.extend([w, b])
        shapes.append([list(w.shape), list(b.shape)])
    arrays.extend([weights.input_mean, weights.input_scale])
    header = {
        "version": WEIGHTS_VERSION,
        "layer_shapes": shapes,
        "hidden_activation": weights.hidden_activation,
        "output_activation": weights.output_activation,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_weights(path) -> MlpWeights:
    with open(path, "rb") as fh:
        return _read_weights(fh)


def _read_weights(fh: io.BufferedReader) -> MlpWeights:
    magic = fh.read(len(WEIGHTS_MAGIC))
    if magic != WEIGHTS_MAGIC:
        raise WeightsFormatError("not a policy weights file")
    raw_len = fh.read(8)
    if len(raw_len) != 8:
        raise WeightsFormatError("truncated header length")
    (hlen,) = struct.unpack("<Q", raw_len)
    blob = fh.read(hlen)
    if len(blob) != hlen:
        raise WeightsFormatError("truncated header")
    try:
        header = json.loads(blob)
    except json.JSONDecodeError as exc:
        raise WeightsFormatError("header is not valid JSON") from exc
    if header.get("version") != WEIGHTS_VERSION:
        raise WeightsFormatError(
            f"unsupported weights version {header.get('version')!r} (expected {WEIGHTS_VERSION})"
        )

    def read_array(shape) -> np.ndarray:
        count = int(np.prod(shape))
        raw = fh.read(count * 8)
        if len(raw) != count * 8:
            raise WeightsFormatError("truncated array data")
        return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(float)

    layers = []
    for wshape, bshape in header["layer_shapes"]:
        layers.append((read_array(wshape), read_array(bshape)))
    in_dim = layers[0][0].shape[1]
    mean = read_array([in_dim])
    scale = read_array([in_dim])
    return MlpWeights(
        layers=tuple(layers),
        hidden_activation=header["hidden_activation"],
        output_activation=header["output_activation"],
        input_mean=mean,
        input_scale=scale,
    )


class MlpPolicy:
    """Network controller: standardized input -> relu -> relu -> tanh -> ranges."""

    name = "mlp"

    def __init__(self, weights: MlpWeights):
        if weights.input_dim != 9 or weights.output_dim != 5:
            raise WeightsFormatError("policy network must map 9 features to 5 commands")
        self.weights = weights

    @classmethod
    def from_file(cls, path) -> "MlpPolicy":
        return cls(load_weights(path))

    def predict(self, x) -> Action:
        z = mlp_forward(self.weights, x)
        return clamp(Action(*denormalize(z)))


def random_mlp_weights(rng: np.random.Generator, hidden: int = 400,
                       input_mean=None, input_scale=None) -> MlpWeights:
    """Small random network in the production architecture, for desk runs."""
    sizes = [(hidden, 9), (hidden, hidden), (5, hidden)]
    layers = []
    for out_dim, in_dim in sizes:
        w = rng.normal(0.0, 1.0 / math.sqrt(in_dim), size=(out_dim, in_dim))
        b = np.zeros(out_dim)
        layers.append((w, b))
    return MlpWeights(
        layers=tuple(layers),
        input_mean=None if input_mean is None else np.asarray(input_mean, float),
        input_scale=None if input_scale is None else np.asarray(input_scale, float),
    )


@dataclass(frozen=True)
class BaselineGains:
    """Gains for the scripted guidance baseline (forces in kN, torques kN m)."""

    kp_force: float = 8.0  # kN per m of position error
    kd_force: float = 150.0  # kN per m/s of body velocity
    kp_torque: float = 3500.0  # kN m per rad of heading error
    kd_torque: float = 70000.0  # kN m per rad/s of yaw rate
    bow_offset_max: float = 0.4  # rad the bow may lead toward the travel bearing
    approach_radius: float = 60.0  # m; berth-parallel heading inside this range
    transit_radius: float = 120.0  # m; full bow offset outside this range
    offset_release_near: float = 35.0  # m boundary distance where the offset closes
    offset_release_far: float = 60.0  # m boundary distance for the full offset
    tunnel_sway_share: float = 0.5
    tunnel_torque_share: float = 0.5
    direction_softening_kn: float = 60.0
    max_differential_kn: float = 80.0
    # obstacle-aware closing-speed limit (uses the d_obs/psi_obs features)
    hull_reach_x: float = 46.2  # m, margin-enlarged half-length
    hull_reach_y: float = 8.5  # m, margin-enlarged half-beam
    obstacle_margin: float = 3.0  # m kept beyond the hull reach
    brake_time: float = 25.0  # s; allowed closing speed = clearance / brake_time
    brake_gain: float = 800.0  # kN per m/s of closing-speed overshoot
    creep_speed: float = 0.0  # m/s closing speed always allowed


class BaselinePolicy:
    """Scripted guidance baseline: berth-parallel crab with a bow offset.

    Desired body-frame force is proportional to (x_err, y_err) with velocity
    damping; desired torque is proportional to the heading error with rate
    damping. The commanded heading is the berth heading plus a bounded bow
    offset toward the travel bearing (released only in open water and far
    from the berth), so the hull turns once early and then translates at a
    near-constant heading; translation eases off while a turn is pending.
    A closing-speed cap derived from d_obs/psi_obs keeps the hull footprint
    off the boundary. A fixed allocation maps the demands to thrusters: the
    azimuths share the planar force along a smooth reversing direction chart
    (Lipschitz at zero crossings), the tunnel takes torque duty first and
    sway with its remaining capacity, and the azimuth differential supplies
    the residual torque.
    """

    name = "baseline"

    def __init__(self, gains: BaselineGains = BaselineGains(),
                 thrusters: Sequence[Thruster] = None):
        self.gains = gains
        if thrusters is None:
            arms = ((-35.0, -5.0), (-35.0, 5.0))
            tunnel_x = 30.0
        else:
            arms = ((thrusters[0].lx, thrusters[0].ly), (thrusters[1].lx, thrusters[1].ly))
            tunnel_x = thrusters[2].lx
        self._arm_sum = (arms[0][0] + arms[1][0], arms[0][1] + arms[1][1])
        self._arm_diff = (arms[0][0] - arms[1][0], arms[0][1] - arms[1][1])
        self._tunnel_x = tunnel_x

    def _demands(self, s: np.ndarray):
        """Body-frame force/torque demand (fx kN, fy kN, t kN m)."""
        g = self.gains
        x_err, y_err, psi_err, u, v, r = s[0], s[1], s[2], s[3], s[4], s[5]
        d_obs, psi_obs = s[7], s[8]
        d = math.hypot(x_err, y_err)

        # bow offset toward the travel bearing, shrunk near the berth and
        # near boundaries so close-quarters work stays berth-parallel
        chi = math.atan2(y_err, x_err)
        beta = wrap_angle(chi - psi_err)  # travel bearing at berth heading
        span = max(g.transit_radius - g.approach_radius, 1e-9)
        sfrac = min(max((d - g.approach_radius) / span, 0.0), 1.0)
        lam = sfrac * sfrac * (3.0 - 2.0 * sfrac)
        room = min(max((d_obs - g.offset_release_near) /
                       max(g.offset_release_far - g.offset_release_near, 1e-9), 0.0), 1.0)
        # taper to zero for near-astern travel so the wrap of beta never
        # flips the offset discontinuously (backing runs stay berth-parallel)
        taper = min(max((math.pi - abs(beta)) / 0.5, 0.0), 1.0)
        offset = lam * room * taper * min(max(beta, -g.bow_offset_max), g.bow_offset_max)

        heading_err = psi_err + offset
        torque = g.kp_torque * heading_err - g.kd_torque * r

        # translation: position PD, eased off while a turn is pending
        align = (0.5 * (1.0 + math.cos(heading_err))) ** 2
        fx = align * g.kp_force * x_err - g.kd_force * u
        fy = align * g.kp_force * y_err - g.kd_force * v

        # cap the demand component toward the nearest boundary so the closing
        # speed never exceeds what the remaining clearance can absorb; the
        # allowance goes negative when the footprint is inside the margin
        co, so = math.cos(psi_obs), math.sin(psi_obs)
        reach = g.hull_reach_x * abs(co) + g.hull_reach_y * abs(so)
        clearance = d_obs - reach - g.obstacle_margin
        v_allowed = max(clearance / g.brake_time, -0.3) + g.creep_speed
        v_toward = u * co + v * so
        f_toward = fx * co + fy * so
        f_cap = g.brake_gain * (v_allowed - v_toward)
        if f_toward > f_cap:
            fx += (f_cap - f_toward) * co
            fy += (f_cap - f_toward) * so
        return fx, fy, torque

    def predict(self, x) -> Action:
        s = _state_array(x)
        if s.shape != (9,):
            raise PolicyInputError("baseline controller expects the 9-feature state")
        g = self.gains
        fx_d, fy_d, t_d = self._demands(s)

        # tunnel: torque duty first (it is the scarce resource close to the
        # quay), sway share from whatever capacity remains
        lo3, hi3 = ACTION_LOW[2], ACTION_HIGH[2]
        f3_torque = float(
            np.clip(g.tunnel_torque_share * t_d / self._tunnel_x, lo3, hi3)
        )
        f3 = f3_torque + float(
            np.clip(g.tunnel_sway_share * fy_d, lo3 - f3_torque, hi3 - f3_torque)
        )

        # azimuths share the remaining planar force. The angle follows a
        # smooth reversing chart: w smoothly carries the sign of the surge
        # demand so backing vectors are represented with negative force
        # (delivery is exact for |fx| well above the softening constant and
        # degrades to tunnel-only sway right at the reversal).
        fx_az = fx_d
        fy_az = fy_d - f3
        soft = math.hypot(fx_az, g.direction_softening_kn)
        w = fx_az / soft
        alpha = w * math.atan2(fy_az, soft)
        c, sn = math.cos(alpha), math.sin(alpha)
        f_common = 0.5 * (fx_az * c + fy_az * sn)

        # residual torque from the azimuth differential (force-neutral)
        t_common = f_common * (self._arm_sum[0] * sn - self._arm_sum[1] * c)
        t_tunnel = f3 * self._tunnel_x
        sensitivity = self._arm_diff[0] * sn - self._arm_diff[1] * c
        if abs(sensitivity) < 1e-6:
            diff = 0.0
        else:
            diff = (t_d - t_tunnel - t_common) / sensitivity
        diff = float(np.clip(diff, -g.max_differential_kn, g.max_differential_kn))

        return clamp(Action(f_common + diff, f_common - diff, f3, alpha, alpha))
