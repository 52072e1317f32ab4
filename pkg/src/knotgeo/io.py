"""Strict JSON curve files and JSONL trajectory frames."""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np

from .curve import Curve, CurveError

__all__ = [
    "ParseError",
    "parse_curve",
    "loads_curve",
    "dumps_curve",
    "write_curve",
    "parse_field",
    "write_field",
    "frames_from",
    "write_frames",
    "read_frames",
    "write_obj",
]

FRAME_KEYS = ("t", "vertices", "energy", "length", "speed", "min_separation")


class ParseError(ValueError):
    """Malformed curve, field or frame file; the message carries the location."""


def _reject_constant(name):
    raise ValueError(f"non-finite value {name}")


def _loads(text, where):
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{where}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None


def _matrix(rows, where, key, dim=None):
    if not isinstance(rows, list) or not rows:
        raise ParseError(f"{where}: field '{key}' must be a non-empty list of rows")
    width = dim
    out = []
    for i, row in enumerate(rows):
        if not isinstance(row, list):
            raise ParseError(f"{where}: {key}[{i}] is not a list")
        if width is None:
            width = len(row)
        if len(row) != width:
            raise ParseError(f"{where}: {key}[{i}] has {len(row)} coordinates, expected {width}")
        for j, val in enumerate(row):
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ParseError(f"{where}: {key}[{i}][{j}] is not a number")
            if not math.isfinite(val):
                raise ParseError(f"{where}: {key}[{i}][{j}] is not finite")
        out.append([float(v) for v in row])
    return np.array(out, dtype=float)


def _dim(obj, where):
    dim = obj.get("dim")
    if dim is None:
        return None
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 2:
        raise ParseError(f"{where}: field 'dim' must be an integer >= 2")
    return dim


def loads_curve(text: str, where: str = "<string>") -> Curve:
    obj = _loads(text, where)
    if not isinstance(obj, dict) or "vertices" not in obj:
        raise ParseError(f"{where}: expected an object with a 'vertices' field")
    x = _matrix(obj["vertices"], where, "vertices", _dim(obj, where))
    try:
        return Curve(x)
    except CurveError as exc:
        raise ParseError(f"{where}: {exc}") from None


def parse_curve(path) -> Curve:
    """Read a curve file ``{"dim": m, "vertices": [[...], ...]}``."""
    return loads_curve(Path(path).read_text(encoding="utf-8"), str(path))


def dumps_curve(c) -> str:
    x = np.asarray(c, dtype=float)
    return json.dumps({"dim": int(x.shape[1]), "vertices": x.tolist()}, allow_nan=False)


def write_curve(c, path) -> None:
    Path(path).write_text(dumps_curve(c) + "\n", encoding="utf-8")


def parse_field(path, shape=None) -> np.ndarray:
    """Read a tangent field file ``{"dim": m, "values": [[...], ...]}``."""
    where = str(path)
    obj = _loads(Path(path).read_text(encoding="utf-8"), where)
    key = "values" if isinstance(obj, dict) and "values" in obj else "vertices"
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{where}: expected an object with a 'values' field")
    u = _matrix(obj[key], where, key, _dim(obj, where))
    if shape is not None and u.shape != tuple(shape):
        raise ParseError(f"{where}: field shape {u.shape} does not match curve {tuple(shape)}")
    return u


def write_field(u, path) -> None:
    u = np.asarray(u, dtype=float)
    Path(path).write_text(json.dumps({"dim": int(u.shape[1]), "values": u.tolist()}, allow_nan=False) + "\n", encoding="utf-8")


def frames_from(traj) -> list[dict]:
    """Frame dicts for a ``Trajectory``."""
    return [
        {
            "t": float(st.t),
            "vertices": np.asarray(st.curve).tolist(),
            "energy": float(traj.energy[k]),
            "length": float(traj.length[k]),
            "speed": float(traj.speed[k]),
            "min_separation": float(traj.min_separation[k]),
        }
        for k, st in enumerate(traj.states)
    ]


def write_frames(frames, path) -> None:
    """Write JSONL, one frame per line.  Accepts a ``Trajectory`` or frame dicts."""
    if hasattr(frames, "states"):
        frames = frames_from(frames)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for fr in frames:
            obj = {k: fr[k] for k in FRAME_KEYS}
            if obj["min_separation"] == math.inf:
                # triangles have no non-adjacent edge pairs
                obj["min_separation"] = None
            fh.write(json.dumps(obj, allow_nan=False) + "\n")


def read_frames(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            obj = _loads(line, where)
            if not isinstance(obj, dict):
                raise ParseError(f"{where}: frame must be an object")
            missing = [k for k in FRAME_KEYS if k not in obj]
            if missing:
                raise ParseError(f"{where}: missing field(s) {', '.join(missing)}")
            for k in FRAME_KEYS:
                if k == "vertices":
                    continue
                val = obj[k]
                if k == "min_separation" and val is None:
                    obj[k] = math.inf
                    continue
                if isinstance(val, bool) or not isinstance(val, (int, float)):
                    raise ParseError(f"{where}: field '{k}' is not a number")
                if not math.isfinite(val):
                    raise ParseError(f"{where}: field '{k}' is not finite")
            obj["vertices"] = _matrix(obj["vertices"], where, "vertices")
            out.append(obj)
    return out


def write_obj(frames, directory) -> list[str]:
    """One closed polyline OBJ file per frame; returns the paths written."""
    if hasattr(frames, "states"):
        frames = frames_from(frames)
    os.makedirs(directory, exist_ok=True)
    paths = []
    for k, fr in enumerate(frames):
        x = np.asarray(fr["vertices"], dtype=float)
        if x.shape[1] == 2:
            x = np.column_stack([x, np.zeros(len(x))])
        elif x.shape[1] > 3:
            x = x[:, :3]
        lines = [f"v {p[0]!r} {p[1]!r} {p[2]!r}" for p in x.tolist()]
        lines.append("l " + " ".join(str(i + 1) for i in range(len(x))) + " 1")
        path = os.path.join(directory, f"frame_{k:05d}.obj")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        paths.append(path)
    return paths
