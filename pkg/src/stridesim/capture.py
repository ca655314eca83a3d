"""Rolling state capture for crash forensics, with a versioned binary dump.

The ring stores one frame per physics substep, taken after controls are
written but before integration, so restoring frame k and running one physics
substep reproduces frame k+1's coordinates bit for bit.

Dump layout (little-endian), stable across platforms::

    magic   b"SSCAPT"
    u32     format version (1)
    u32 x5  N, nq, ctrl dim, ring capacity, frame count
    u32+b   config hash (sha256 hex of the env config)
    u32+b   task id (utf-8)
    u32+b   env config (JSON, utf-8) -- makes a dump self-contained
    u32+b   metadata (JSON: offending terms, model field values)
    frames  frame count times: u64 sim_step, then q, qd, ctrl as f64 bytes

Floats ride through JSON via repr, which round-trips float64 exactly.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .sim.model import Model
from .sim.state import BatchState, StateFrame

CAPTURE_MAGIC = b"SSCAPT"
CAPTURE_VERSION = 1


class CaptureError(ValueError):
    pass


class CaptureRing:
    """Preallocated ring of the K most recent replayable frames."""

    def __init__(self, capacity: int, n_worlds: int, nq: int, n_ctrl: int):
        if capacity < 1:
            raise CaptureError("capture ring capacity must be >= 1")
        self.capacity = capacity
        self.q = np.zeros((capacity, n_worlds, nq))
        self.qd = np.zeros((capacity, n_worlds, nq))
        self.ctrl = np.zeros((capacity, n_worlds, n_ctrl))
        self.sim_steps = np.zeros(capacity, dtype=np.int64)
        self.count = 0
        self._head = -1

    def push(self, state: BatchState) -> None:
        self._head = (self._head + 1) % self.capacity
        self.q[self._head] = state.q
        self.qd[self._head] = state.qd
        self.ctrl[self._head] = state.ctrl
        self.sim_steps[self._head] = state.sim_step
        self.count = min(self.count + 1, self.capacity)

    def frames(self) -> list[StateFrame]:
        """Stored frames oldest-first; sim_steps strictly increasing."""
        out = []
        for i in range(self.count):
            slot = (self._head - self.count + 1 + i) % self.capacity
            out.append(
                StateFrame(
                    self.q[slot].copy(),
                    self.qd[slot].copy(),
                    self.ctrl[slot].copy(),
                    int(self.sim_steps[slot]),
                )
            )
        return out


def _pack_blob(data: bytes) -> bytes:
    return struct.pack("<I", len(data)) + data


def dump_capture(
    path: str,
    ring: CaptureRing,
    config_hash: str,
    task_id: str = "",
    config_json: dict | None = None,
    metadata: dict | None = None,
) -> None:
    frames = ring.frames()
    n, nq = ring.q.shape[1], ring.q.shape[2]
    n_ctrl = ring.ctrl.shape[2]
    with open(path, "wb") as fh:
        fh.write(CAPTURE_MAGIC)
        fh.write(struct.pack("<I", CAPTURE_VERSION))
        fh.write(struct.pack("<5I", n, nq, n_ctrl, ring.capacity, len(frames)))
        fh.write(_pack_blob(config_hash.encode()))
        fh.write(_pack_blob(task_id.encode()))
        fh.write(_pack_blob(json.dumps(config_json or {}).encode()))
        fh.write(_pack_blob(json.dumps(metadata or {}).encode()))
        for frame in frames:
            fh.write(struct.pack("<q", frame.sim_step))
            fh.write(np.ascontiguousarray(frame.q, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(frame.qd, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(frame.ctrl, dtype="<f8").tobytes())


class CaptureDump:
    """A loaded dump: frames plus everything needed to rebuild the scene."""

    def __init__(self, frames, n, nq, n_ctrl, capacity, config_hash, task_id, config, metadata):
        self.frames: list[StateFrame] = frames
        self.n_worlds = n
        self.nq = nq
        self.n_ctrl = n_ctrl
        self.capacity = capacity
        self.config_hash = config_hash
        self.task_id = task_id
        self.config = config
        self.metadata = metadata

    def nonfinite_summary(self) -> list[dict]:
        """First nonfinite occurrence per (array, world) across frames."""
        seen = set()
        hits = []
        for idx, frame in enumerate(self.frames):
            for name, arr in (("q", frame.q), ("qd", frame.qd), ("ctrl", frame.ctrl)):
                bad_worlds = np.flatnonzero(~np.isfinite(arr).all(axis=1))
                for w in bad_worlds:
                    key = (name, int(w))
                    if key not in seen:
                        seen.add(key)
                        hits.append(
                            {
                                "array": name,
                                "world": int(w),
                                "frame": idx,
                                "sim_step": frame.sim_step,
                            }
                        )
        return hits


def load_capture(path: str) -> CaptureDump:
    try:
        raw = open(path, "rb").read()
    except OSError as err:
        raise CaptureError(f"cannot read capture dump {path!r}: {err}") from None
    if len(raw) < 10 or raw[:6] != CAPTURE_MAGIC:
        raise CaptureError(f"{path!r} is not a capture dump")
    (version,) = struct.unpack_from("<I", raw, 6)
    if version != CAPTURE_VERSION:
        raise CaptureError(f"unsupported capture version {version} (expected {CAPTURE_VERSION})")
    offset = 10
    try:
        n, nq, n_ctrl, capacity, count = struct.unpack_from("<5I", raw, offset)
        offset += 20
        blobs = []
        for _ in range(4):
            (length,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            blobs.append(raw[offset : offset + length])
            if len(blobs[-1]) != length:
                raise CaptureError(f"truncated dump {path!r}")
            offset += length
        config_hash = blobs[0].decode()
        task_id = blobs[1].decode()
        config = json.loads(blobs[2]) if blobs[2] else {}
        metadata = json.loads(blobs[3]) if blobs[3] else {}
        frames = []
        block = 8 * n * nq
        ctrl_block = 8 * n * n_ctrl
        for _ in range(count):
            (sim_step,) = struct.unpack_from("<q", raw, offset)
            offset += 8
            if offset + 2 * block + ctrl_block > len(raw):
                raise CaptureError(f"truncated dump {path!r}")
            q = np.frombuffer(raw, "<f8", n * nq, offset).reshape(n, nq).copy()
            offset += block
            qd = np.frombuffer(raw, "<f8", n * nq, offset).reshape(n, nq).copy()
            offset += block
            ctrl = np.frombuffer(raw, "<f8", n * n_ctrl, offset).reshape(n, n_ctrl).copy()
            offset += ctrl_block
            frames.append(StateFrame(q, qd, ctrl, sim_step))
    except struct.error:
        raise CaptureError(f"truncated dump {path!r}") from None
    return CaptureDump(
        frames, n, nq, n_ctrl, capacity, config_hash, task_id, config, metadata
    )


def model_field_metadata(model: Model) -> dict:
    """Serializable snapshot of the randomizable field table."""
    return {
        name: {
            "expanded": model.field(name).expanded,
            "value": model.field(name).value.tolist(),
        }
        for name in model.field_names()
    }


def restore_model_fields(model: Model, fields_meta: dict) -> None:
    """Re-apply dumped field values so replay physics matches the run."""
    for name, info in fields_meta.items():
        if info.get("expanded"):
            model.expand_field(name)
        f = model.field(name)
        f.value[...] = np.asarray(info["value"], dtype=np.float64)
