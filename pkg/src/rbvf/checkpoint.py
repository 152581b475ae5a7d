"""Checkpoint container: UTF-8 text header followed by raw float64 values.

Layout::

    RBVF-CHECKPOINT v1
    model <json model description>
    param <name> <comma-separated shape> <element count>
    ...
    end <total element count>
    <little-endian float64 payload, parameters in header order, row-major>
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .nn import ParamStore

MAGIC = "RBVF-CHECKPOINT v1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: ParamStore, model_info: dict | None = None):
    lines = [MAGIC, "model " + json.dumps(model_info or {}, sort_keys=True)]
    total = 0
    for name, value in params.values.items():
        if any(c.isspace() for c in name):
            raise CheckpointError(f"parameter name {name!r} contains whitespace")
        shape = ",".join(str(d) for d in value.shape)
        lines.append(f"param {name} {shape} {value.size}")
        total += value.size
    lines.append(f"end {total}")
    header = ("\n".join(lines) + "\n").encode("utf-8")
    payload = b"".join(
        np.ascontiguousarray(v, dtype="<f8").tobytes(order="C") for v in params.values.values()
    )
    Path(path).write_bytes(header + payload)


def _parse_header(blob: bytes) -> tuple[dict, list[tuple[str, tuple[int, ...], int]], int]:
    entries = []
    pos = 0
    model_info = None

    def next_line():
        nonlocal pos
        end = blob.find(b"\n", pos)
        if end < 0:
            raise CheckpointError("truncated checkpoint header")
        line = blob[pos:end].decode("utf-8")
        pos = end + 1
        return line

    if next_line() != MAGIC:
        raise CheckpointError("not an RBVF checkpoint (bad version tag)")
    line = next_line()
    if not line.startswith("model "):
        raise CheckpointError("missing model line")
    model_info = json.loads(line[len("model "):])
    while True:
        line = next_line()
        parts = line.split(" ")
        if parts[0] == "end":
            total = int(parts[1])
            break
        if parts[0] != "param" or len(parts) != 4:
            raise CheckpointError(f"malformed header line: {line!r}")
        shape = tuple(int(d) for d in parts[2].split(",")) if parts[2] else ()
        count = int(parts[3])
        if int(np.prod(shape, dtype=np.int64)) != count:
            raise CheckpointError(f"shape/count mismatch for {parts[1]}")
        entries.append((parts[1], shape, count))
    if sum(c for _, _, c in entries) != total:
        raise CheckpointError("element total does not match parameter list")
    return model_info, entries, pos


def load_checkpoint(path, expected: ParamStore | None = None, expected_model: dict | None = None):
    """Read a checkpoint; returns ``(params, model_info)``.

    If ``expected`` is given, names and shapes must match it exactly. If
    ``expected_model`` is given it must equal the stored model description.
    """
    blob = Path(path).read_bytes()
    model_info, entries, offset = _parse_header(blob)
    total = sum(c for _, _, c in entries)
    if len(blob) - offset != 8 * total:
        raise CheckpointError(
            f"payload holds {len(blob) - offset} bytes, header declares {8 * total}"
        )
    data = np.frombuffer(blob, dtype="<f8", offset=offset, count=total)
    params = ParamStore()
    cursor = 0
    for name, shape, count in entries:
        params.add(name, data[cursor:cursor + count].reshape(shape).astype(np.float64))
        cursor += count
    if expected is not None and expected.shapes() != params.shapes():
        raise CheckpointError("checkpoint parameters do not match the model spec")
    # compare through JSON so tuples and lists describe the same model
    if expected_model is not None and json.loads(json.dumps(expected_model)) != model_info:
        raise CheckpointError("checkpoint model description does not match")
    return params, model_info
