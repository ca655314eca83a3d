"""Actuator models that turn joint targets into torques, outside the physics.

Three torque sources (ideal PD, DC motor with a speed-dependent torque
envelope, learned MLP) plus a delay wrapper that replays targets with a
per-world latency quantized to the physics timestep. Every variant clamps its
output to the configured effort limit.

The MLP weights live in a self-describing binary container (see
``save_mlp_weights``): magic, format version, then per layer an activation
name and the row-major float64 weight matrix and bias.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .config import register_variant
from .rng import StreamPack
from .sim.model import Model

MLP_MAGIC = b"SSMLP1"
MLP_VERSION = 1
_ACTIVATIONS = {
    "identity": lambda x: x,
    "relu": lambda x: np.maximum(x, 0.0),
    "tanh": np.tanh,
}


class ActuatorError(ValueError):
    pass


@register_variant
@dataclass
class IdealPdCfg:
    kind: str = "ideal_pd"
    joint_patterns: list[str] = field(default_factory=lambda: [".*"])
    kp: float = 40.0
    kd: float = 1.0
    effort_limit: float = 30.0


@register_variant
@dataclass
class DcMotorCfg:
    kind: str = "dc_motor"
    joint_patterns: list[str] = field(default_factory=lambda: [".*"])
    kp: float = 40.0
    kd: float = 1.0
    effort_limit: float = 30.0
    saturation_effort: float = 45.0
    velocity_limit: float = 20.0


@register_variant
@dataclass
class MlpActuatorCfg:
    kind: str = "mlp"
    joint_patterns: list[str] = field(default_factory=lambda: [".*"])
    weights_path: str = ""
    error_history: int = 2
    velocity_history: int = 2
    effort_limit: float = 30.0


@register_variant
@dataclass
class DelayedCfg:
    kind: str = "delayed"
    inner: "ActuatorCfg" = field(default_factory=IdealPdCfg)
    latency_range: tuple[float, float] = (0.0, 0.02)
    resample_on_reset: bool = True
    # patterns live on the inner cfg
    joint_patterns: list[str] = field(default_factory=list)


ActuatorCfg = IdealPdCfg | DcMotorCfg | MlpActuatorCfg | DelayedCfg


def _validate(cfg: ActuatorCfg) -> None:
    if isinstance(cfg, DelayedCfg):
        lo, hi = cfg.latency_range
        if lo < 0 or hi < lo:
            raise ActuatorError(f"latency_range must be ordered and non-negative, got {cfg.latency_range}")
        _validate(cfg.inner)
        return
    if cfg.effort_limit <= 0:
        raise ActuatorError("effort_limit must be > 0")
    if isinstance(cfg, DcMotorCfg):
        if cfg.effort_limit > cfg.saturation_effort:
            raise ActuatorError("DC motor needs effort_limit <= saturation_effort")
        if cfg.velocity_limit <= 0:
            raise ActuatorError("DC motor velocity_limit must be > 0")


# ---------------------------------------------------------------------------
# pure torque laws


def pd_torque(kp, kd, effort_limit, q_des, qd_des, q, qd) -> np.ndarray:
    """tau = clamp(kp*(q_des - q) + kd*(qd_des - qd), +-effort_limit)."""
    tau = kp * (q_des - q) + kd * (qd_des - qd)
    return np.clip(tau, -effort_limit, effort_limit)


def dc_motor_torque(
    kp, kd, effort_limit, saturation_effort, velocity_limit, q_des, qd_des, q, qd
) -> np.ndarray:
    """PD torque clamped to the speed-dependent motor envelope."""
    tau = kp * (q_des - q) + kd * (qd_des - qd)
    hi = np.clip(saturation_effort * (1.0 - qd / velocity_limit), 0.0, effort_limit)
    lo = np.clip(saturation_effort * (-1.0 - qd / velocity_limit), -effort_limit, 0.0)
    return np.clip(tau, lo, hi)


# ---------------------------------------------------------------------------
# MLP weights container


def save_mlp_weights(path: str, layers: list[tuple[np.ndarray, np.ndarray, str]]) -> None:
    """Write [(W, b, activation), ...]; W is (out, in), b is (out,)."""
    with open(path, "wb") as fh:
        fh.write(MLP_MAGIC)
        fh.write(struct.pack("<II", MLP_VERSION, len(layers)))
        for w, b, act in layers:
            if act not in _ACTIVATIONS:
                raise ActuatorError(f"unknown activation {act!r}")
            name = act.encode()
            out_dim, in_dim = w.shape
            fh.write(struct.pack("<B", len(name)) + name)
            fh.write(struct.pack("<II", in_dim, out_dim))
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_mlp_weights(path: str) -> list[tuple[np.ndarray, np.ndarray, str]]:
    try:
        raw = open(path, "rb").read()
    except OSError as err:
        raise ActuatorError(f"cannot read MLP weights file {path!r}: {err}") from None
    if raw[:6] != MLP_MAGIC:
        raise ActuatorError(f"{path!r} is not an MLP weights file")
    version, n_layers = struct.unpack_from("<II", raw, 6)
    if version != MLP_VERSION:
        raise ActuatorError(f"unsupported MLP weights version {version}")
    offset = 14
    layers = []
    for i in range(n_layers):
        try:
            (name_len,) = struct.unpack_from("<B", raw, offset)
            offset += 1
            act = raw[offset : offset + name_len].decode()
            offset += name_len
            in_dim, out_dim = struct.unpack_from("<II", raw, offset)
            offset += 8
            w = np.frombuffer(raw, "<f8", in_dim * out_dim, offset).reshape(out_dim, in_dim)
            offset += 8 * in_dim * out_dim
            b = np.frombuffer(raw, "<f8", out_dim, offset)
            offset += 8 * out_dim
        except (struct.error, ValueError):
            raise ActuatorError(f"layer {i}: truncated or malformed data in {path!r}") from None
        if act not in _ACTIVATIONS:
            raise ActuatorError(f"layer {i}: unknown activation {act!r}")
        if layers and w.shape[1] != layers[-1][0].shape[0]:
            raise ActuatorError(
                f"layer {i}: input dim {w.shape[1]} does not match "
                f"previous output dim {layers[-1][0].shape[0]}"
            )
        layers.append((w.copy(), b.copy(), act))
    return layers


def mlp_forward(layers, x: np.ndarray) -> np.ndarray:
    for w, b, act in layers:
        x = _ACTIVATIONS[act](x @ w.T + b)
    return x


# ---------------------------------------------------------------------------
# runtime actuators


class DelayBuffer:
    """Ring of past targets with a per-world read offset in substeps."""

    def __init__(self, capacity: int, n_worlds: int, dim: int):
        self.capacity = capacity
        self.ring = np.zeros((capacity, n_worlds, dim))
        self.head = 0
        self.delay_steps = np.zeros(n_worlds, dtype=np.int64)
        self._world_idx = np.arange(n_worlds)

    def set_delays(self, steps: np.ndarray, ids: np.ndarray | None = None) -> None:
        steps = np.clip(steps, 0, self.capacity - 1)
        if ids is None:
            self.delay_steps[...] = steps
        else:
            self.delay_steps[ids] = steps

    def fill(self, values: np.ndarray, ids: np.ndarray) -> None:
        """Flood a world's history with one target (used at episode reset)."""
        self.ring[:, ids, :] = values[ids]

    def push_and_read(self, values: np.ndarray) -> np.ndarray:
        """Store this substep's targets, return those from delay_steps ago."""
        self.head = (self.head + 1) % self.capacity
        self.ring[self.head] = values
        slot = (self.head - self.delay_steps) % self.capacity
        return self.ring[slot, self._world_idx, :]


class Actuator:
    """Joint-set torque source built from one ActuatorCfg."""

    def __init__(
        self,
        name: str,
        cfg: ActuatorCfg,
        model: Model,
        joint_ids: np.ndarray,
        streams: StreamPack | None = None,
    ):
        _validate(cfg)
        self.name = name
        self.cfg = cfg
        self.joint_ids = joint_ids
        self.model = model
        self.streams = streams
        n, dim = model.n_worlds, len(joint_ids)
        self.delay: DelayBuffer | None = None
        inner = cfg
        if isinstance(cfg, DelayedCfg):
            inner = cfg.inner
            capacity = int(np.ceil(cfg.latency_range[1] / model.physics_dt)) + 1
            self.delay = DelayBuffer(capacity, n, dim)
            self.delay.set_delays(self._draw_delays(np.arange(n)))
        self.inner = inner
        if isinstance(inner, (IdealPdCfg, DcMotorCfg)):
            # gains join the randomizable field table
            model.register_field(f"actuator.{name}.kp", np.full(dim, inner.kp))
            model.register_field(f"actuator.{name}.kd", np.full(dim, inner.kd))
        self._layers = None
        if isinstance(inner, MlpActuatorCfg):
            self._layers = load_mlp_weights(inner.weights_path)
            in_dim = inner.error_history + inner.velocity_history
            if self._layers[0][0].shape[1] != in_dim:
                raise ActuatorError(
                    f"layer 0: expects input dim {self._layers[0][0].shape[1]}, "
                    f"actuator provides {in_dim}"
                )
            if self._layers[-1][0].shape[0] != 1:
                raise ActuatorError("final layer must output one torque per joint")
            self._err_hist = np.zeros((inner.error_history, n, dim))
            self._vel_hist = np.zeros((inner.velocity_history, n, dim))

    def _draw_delays(self, ids: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        lo, hi = cfg.latency_range
        if self.streams is None or hi == lo:
            latency = np.full(len(ids), lo)
        else:
            latency = self.streams.uniform(f"actuator.{self.name}.latency", lo, hi, ids, 1)[:, 0]
        return np.round(latency / self.model.physics_dt).astype(np.int64)

    def reset(self, ids: np.ndarray, targets: np.ndarray) -> None:
        """Refill delay/history state with the reset-time target."""
        if self.delay is not None:
            self.delay.fill(targets[:, self.joint_ids], ids)
            if isinstance(self.cfg, DelayedCfg) and self.cfg.resample_on_reset:
                self.delay.set_delays(self._draw_delays(ids), ids)
        if self._layers is not None:
            self._err_hist[:, ids, :] = 0.0
            self._vel_hist[:, ids, :] = 0.0

    def compute(self, targets: np.ndarray, q: np.ndarray, qd: np.ndarray) -> np.ndarray:
        """Torques for this actuator's joints; called every substep.

        ``targets`` is the full (N, k) joint-position target array; q/qd are
        the current joint states (N, k).
        """
        ids = self.joint_ids
        q_des = targets[:, ids]
        if self.delay is not None:
            q_des = self.delay.push_and_read(q_des)
        qj, qdj = q[:, ids], qd[:, ids]
        inner = self.inner
        if isinstance(inner, IdealPdCfg):
            kp = self.model.field(f"actuator.{self.name}.kp").value
            kd = self.model.field(f"actuator.{self.name}.kd").value
            return pd_torque(kp, kd, inner.effort_limit, q_des, 0.0, qj, qdj)
        if isinstance(inner, DcMotorCfg):
            kp = self.model.field(f"actuator.{self.name}.kp").value
            kd = self.model.field(f"actuator.{self.name}.kd").value
            return dc_motor_torque(
                kp, kd, inner.effort_limit, inner.saturation_effort,
                inner.velocity_limit, q_des, 0.0, qj, qdj,
            )
        # MLP: newest-first histories of position error and velocity
        self._err_hist = np.roll(self._err_hist, 1, axis=0)
        self._err_hist[0] = q_des - qj
        self._vel_hist = np.roll(self._vel_hist, 1, axis=0)
        self._vel_hist[0] = qdj
        n, dim = qj.shape
        feats = np.concatenate(
            [
                self._err_hist.transpose(1, 2, 0).reshape(n * dim, -1),
                self._vel_hist.transpose(1, 2, 0).reshape(n * dim, -1),
            ],
            axis=1,
        )
        tau = mlp_forward(self._layers, feats)[:, 0].reshape(n, dim)
        return np.clip(tau, -inner.effort_limit, inner.effort_limit)
