"""Versioned plain-text checkpoints of named float arrays.

Layout::

    ocv1 <env> <n_options> <feature-kind> [key=value ...]
    array <name> <dim> <dim> ...
    <values, one line per trailing-axis row>
    ...
    end

Floats are written with ``repr`` (shortest round-trip), so loading
restores every value bit for bit.
"""

from __future__ import annotations

import numpy as np

VERSION = "ocv1"


class CheckpointError(ValueError):
    pass


def dumps_arrays(env: str, n_options: int, feature_kind: str, arrays: dict, meta: dict | None = None) -> str:
    header = [VERSION, env, str(n_options), feature_kind]
    header += [f"{k}={v}" for k, v in (meta or {}).items()]
    out = [" ".join(header)]
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=float)
        out.append(" ".join(["array", name] + [str(d) for d in arr.shape]))
        rows = arr.reshape(-1, arr.shape[-1]) if arr.ndim else arr.reshape(1, 1)
        out.extend(" ".join(repr(float(x)) for x in row) for row in rows)
    out.append("end")
    return "\n".join(out) + "\n"


def save_arrays(path, env, n_options, feature_kind, arrays, meta=None) -> None:
    text = dumps_arrays(env, n_options, feature_kind, arrays, meta)
    with open(path, "w") as fh:
        fh.write(text)


def loads_arrays(text: str) -> tuple[dict, dict]:
    """Parse a checkpoint into ``(header, arrays)``; nothing is returned on any error."""
    lines = text.splitlines()
    if not lines:
        raise CheckpointError("empty checkpoint")
    head = lines[0].split()
    if not head or head[0] != VERSION:
        found = head[0] if head else ""
        raise CheckpointError(f"unsupported checkpoint version {found!r}, expected {VERSION}")
    if len(head) < 4:
        raise CheckpointError("header needs env, option count and feature kind")
    header = {"env": head[1], "n_options": int(head[2]), "feature_kind": head[3]}
    for tok in head[4:]:
        key, sep, value = tok.partition("=")
        if not sep:
            raise CheckpointError(f"malformed header field {tok!r}")
        header[key] = value
    if lines[-1].strip() != "end":
        raise CheckpointError("missing 'end' marker (truncated checkpoint?)")
    lines = lines[:-1]
    arrays = {}
    i = 1
    while i < len(lines):
        toks = lines[i].split()
        if not toks:
            i += 1
            continue
        if toks[0] != "array" or len(toks) < 2:
            raise CheckpointError(f"line {i + 1}: expected 'array <name> <dims...>'")
        name = toks[1]
        shape = tuple(int(d) for d in toks[2:])
        size = int(np.prod(shape)) if shape else 1
        n_rows = size // shape[-1] if shape and shape[-1] else (0 if shape else 1)
        body = lines[i + 1 : i + 1 + n_rows]
        values = [float(x) for row in body for x in row.split()]
        if len(body) < n_rows or len(values) != size:
            raise CheckpointError(f"array {name!r}: expected {size} values, found {len(values)} (truncated?)")
        arrays[name] = np.array(values, dtype=float).reshape(shape)
        i += 1 + n_rows
    return header, arrays


def load_arrays(path) -> tuple[dict, dict]:
    with open(path) as fh:
        return loads_arrays(fh.read())
