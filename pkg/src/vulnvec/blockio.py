"""Binary model-file convention: one JSON header line, then raw
little-endian float32 blocks in the order the header declares. Offsets are
byte positions relative to the first byte after the header newline."""

from __future__ import annotations

import json

import numpy as np

FORMAT_TAG = "vulnvec-blocks-1"


def write_block_file(header_extra: dict, blocks: dict[str, np.ndarray]) -> bytes:
    declared = {}
    offset = 0
    payloads = []
    for name, array in blocks.items():
        data = np.ascontiguousarray(array, dtype="<f4").tobytes()
        declared[name] = {"offset": offset, "shape": list(array.shape)}
        payloads.append(data)
        offset += len(data)
    header = {"format": FORMAT_TAG, **header_extra, "blocks": declared}
    return json.dumps(header).encode("utf-8") + b"\n" + b"".join(payloads)


def read_block_file(data: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    newline = data.index(b"\n")
    header = json.loads(data[:newline].decode("utf-8"))
    if header.get("format") != FORMAT_TAG:
        raise ValueError(f"unrecognized model file format: {header.get('format')!r}")
    body = data[newline + 1 :]
    blocks = {}
    for name, meta in header["blocks"].items():
        shape = tuple(meta["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = meta["offset"]
        raw = body[start : start + 4 * count]
        blocks[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)
    return header, blocks
