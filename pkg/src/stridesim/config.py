"""Config-instance utilities: dotted-path overrides, serialization, hashing.

Configs across the project are plain dataclass instances composed into trees
(dataclasses, dicts of dataclasses keyed by term name, lists, tuples, and
scalars). This module walks those trees generically so that:

  * every leaf field is addressable from the command line as a dotted path
    (``env.scene.num-envs``, dashes and underscores interchangeable),
  * any config can round-trip through JSON (capture dumps embed the full
    environment config so a replay session is self-contained),
  * configs can be hashed for capture-dump provenance checks.

Variant dataclasses (actuators, sub-terrains, ...) carry a ``kind`` field used
as the discriminator when deserializing; register them with
``register_variant``.
"""

from __future__ import annotations

import dataclasses
import difflib
import hashlib
import json
import types
import typing
from typing import Any, Union

_VARIANTS: dict[str, type] = {}


class ConfigError(Exception):
    pass


def register_variant(cls: type) -> type:
    """Class decorator: make a dataclass deserializable via its ``kind``."""
    field_names = {f.name for f in dataclasses.fields(cls)}
    if "kind" not in field_names:
        raise ConfigError(f"{cls.__name__} has no 'kind' field")
    kind = cls.__dataclass_fields__["kind"].default
    _VARIANTS[kind] = cls
    return cls


def _norm(segment: str) -> str:
    return segment.replace("-", "_")


# ---------------------------------------------------------------------------
# serialization


def to_dict(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_dict(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    if isinstance(obj, (type(None), bool, int, float, str)):
        return obj
    raise ConfigError(f"unserializable config value of type {type(obj).__name__}")


def _is_union(tp: Any) -> bool:
    origin = typing.get_origin(tp)
    return origin is Union or origin is types.UnionType


def _is_optional(tp: Any) -> tuple[bool, Any]:
    if _is_union(tp):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) < len(typing.get_args(tp)):
            return True, (args[0] if len(args) == 1 else Union[tuple(args)])
    return False, tp


def from_dict(tp: Any, data: Any) -> Any:
    """Rebuild a config value of declared type ``tp`` from plain JSON data."""
    optional, tp = _is_optional(tp)
    if data is None:
        if optional:
            return None
        raise ConfigError(f"null not allowed for {tp}")
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        return _dataclass_from_dict(tp, data)
    if _is_union(tp):  # variant union: dispatch on "kind"
        kind = data.get("kind")
        if kind not in _VARIANTS:
            raise ConfigError(f"unknown variant kind {kind!r}")
        return _dataclass_from_dict(_VARIANTS[kind], data)
    if origin is dict:
        _, vt = typing.get_args(tp)
        return {k: from_dict(vt, v) for k, v in data.items()}
    if origin is list:
        (et,) = typing.get_args(tp)
        return [from_dict(et, v) for v in data]
    if origin is tuple:
        args = typing.get_args(tp)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(from_dict(args[0], v) for v in data)
        return tuple(from_dict(at, v) for at, v in zip(args, data))
    if tp is float:
        return float(data)
    if tp in (int, bool, str, Any):
        return data
    raise ConfigError(f"cannot deserialize type {tp}")


def _dataclass_from_dict(cls: type, data: dict) -> Any:
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in data:
            kwargs[f.name] = from_dict(hints[f.name], data[f.name])
    return cls(**kwargs)


def config_hash(obj: Any) -> str:
    """sha256 hex of the canonical JSON serialization (order-preserving)."""
    payload = json.dumps(to_dict(obj), separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# dotted-path access


def enumerate_paths(obj: Any, prefix: str = "") -> list[tuple[str, str, Any]]:
    """All (path, type name, current value) leaf triples under ``obj``."""
    out: list[tuple[str, str, Any]] = []

    def walk(node: Any, path: str) -> None:
        if dataclasses.is_dataclass(node) and not isinstance(node, type):
            for f in dataclasses.fields(node):
                walk(getattr(node, f.name), f"{path}.{f.name}" if path else f.name)
        elif isinstance(node, dict):
            for k, v in node.items():
                walk(v, f"{path}.{k}" if path else str(k))
        elif isinstance(node, list):
            for i, v in enumerate(node):
                walk(v, f"{path}.{i}")
        else:
            tname = type(node).__name__ if node is not None else "None"
            out.append((path.replace("_", "-"), tname, node))

    walk(obj, prefix)
    return out


def _resolve(obj: Any, segments: list[str], full_path: str) -> tuple[Any, str]:
    """Walk to the parent of the leaf; returns (parent, final key)."""
    node = obj
    for depth, seg in enumerate(segments[:-1]):
        node = _child(node, seg, full_path)
    return node, segments[-1]


def _available_keys(node: Any) -> list[str]:
    if dataclasses.is_dataclass(node) and not isinstance(node, type):
        return [f.name for f in dataclasses.fields(node)]
    if isinstance(node, dict):
        return [str(k) for k in node.keys()]
    if isinstance(node, list):
        return [str(i) for i in range(len(node))]
    return []

def _child(node: Any, seg: str, full_path: str) -> Any:
    keys = _available_keys(node)
    if dataclasses.is_dataclass(node) and not isinstance(node, type):
        name = _norm(seg)
        if name in keys:
            return getattr(node, name)
    elif isinstance(node, dict):
        for k in node:
            if _norm(str(k)) == _norm(seg):
                return node[k]
    elif isinstance(node, list):
        if seg.isdigit() and int(seg) < len(node):
            return node[int(seg)]
    _fail_with_suggestion(seg, keys, full_path)


def _fail_with_suggestion(seg: str, keys: list[str], full_path: str) -> None:
    shown = [k.replace("_", "-") for k in keys]
    near = difflib.get_close_matches(_norm(seg), keys, n=3, cutoff=0.4)
    hint = ""
    if near:
        hint = " -- did you mean " + ", ".join(f"'{k.replace('_', '-')}'" for k in near) + "?"
    raise ConfigError(
        f"no config field '{seg}' while resolving '{full_path}'"
        f" (available: {', '.join(shown) or 'none'}){hint}"
    )


def _parse_value(raw: str, tp: Any, current: Any):
    optional, tp = _is_optional(tp)
    if optional and raw.lower() in ("none", "null"):
        return None
    origin = typing.get_origin(tp)
    if origin is tuple:
        parts = [p for p in raw.replace("(", "").replace(")", "").split(",") if p.strip()]
        args = typing.get_args(tp)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_parse_value(p.strip(), args[0], None) for p in parts)
        return tuple(_parse_value(p.strip(), at, None) for p, at in zip(parts, args))
    if origin is list:
        (et,) = typing.get_args(tp)
        return [_parse_value(p.strip(), et, None) for p in raw.split(",") if p.strip()]
    if tp is bool or isinstance(current, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse {raw!r} as bool")
    if tp is int or (tp is Any and isinstance(current, int)):
        return int(raw)
    if tp is float or (tp is Any and isinstance(current, float)):
        return float(raw)
    if tp is str or (tp is Any and isinstance(current, str)):
        return raw
    # untyped fallback: mimic the current value's type
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, (tuple, list)):
        vals = [float(p) for p in raw.replace("(", "").replace(")", "").split(",") if p.strip()]
        return type(current)(vals)
    return raw


def apply_override(obj: Any, dotted: str, raw_value: str) -> None:
    """Set the field at ``dotted`` (dash- or underscore-spelled) to the parsed
    value. Raises ConfigError with close-match suggestions on a bad path."""
    segments = dotted.split(".")
    parent, last = _resolve(obj, segments, dotted)
    if dataclasses.is_dataclass(parent) and not isinstance(parent, type):
        name = _norm(last)
        fields = {f.name: f for f in dataclasses.fields(parent)}
        if name not in fields:
            _fail_with_suggestion(last, list(fields), dotted)
        hints = typing.get_type_hints(type(parent))
        value = _parse_value(raw_value, hints[name], getattr(parent, name))
        setattr(parent, name, value)
    elif isinstance(parent, dict):
        for k in parent:
            if _norm(str(k)) == _norm(last):
                parent[k] = _parse_value(raw_value, Any, parent[k])
                return
        _fail_with_suggestion(last, [str(k) for k in parent], dotted)
    elif isinstance(parent, list):
        if not last.isdigit() or int(last) >= len(parent):
            _fail_with_suggestion(last, [str(i) for i in range(len(parent))], dotted)
        parent[int(last)] = _parse_value(raw_value, Any, parent[int(last)])
    else:
        raise ConfigError(f"'{dotted}' does not resolve to a settable field")
