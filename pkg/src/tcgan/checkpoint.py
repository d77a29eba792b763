"""Line-oriented text checkpoints.

Layout::

    # tcgan-ckpt v1
    # meta {"kind": "tcgan", ...}
    gen.dense.w 90,2560
    0.0123...
    ...

Each array is a ``name shape_csv`` line followed by one row-major value per
line at 17 significant digits, which round-trips float64 exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

HEADER = "# tcgan-ckpt v1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    out = [HEADER]
    if meta is not None:
        out.append("# meta " + json.dumps(meta, sort_keys=True))
    for name, arr in arrays.items():
        if any(c.isspace() for c in name):
            raise CheckpointError(f"array name {name!r} contains whitespace")
        arr = np.asarray(arr, dtype=np.float64)
        out.append(f"{name} {','.join(str(d) for d in arr.shape)}")
        out.extend(f"{x:.17g}" for x in arr.reshape(-1))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if not lines or lines[0] != HEADER:
        raise CheckpointError(f"{path}: missing header {HEADER!r}")
    meta: dict = {}
    arrays: dict[str, np.ndarray] = {}
    i = 1
    while i < len(lines):
        line = lines[i]
        i += 1
        if not line:
            continue
        if line.startswith("# meta "):
            meta = json.loads(line[len("# meta ") :])
            continue
        if line.startswith("#"):
            continue
        try:
            name, shape_csv = line.split(" ")
            shape = tuple(int(d) for d in shape_csv.split(",")) if shape_csv else ()
            n = int(np.prod(shape))
            values = np.array([float(v) for v in lines[i : i + n]], dtype=np.float64)
        except ValueError as exc:
            raise CheckpointError(f"{path}:{i}: malformed entry ({exc})") from None
        if len(values) != n:
            raise CheckpointError(f"{path}:{i}: array {name!r} truncated")
        arrays[name] = values.reshape(shape)
        i += n
    return arrays, meta
