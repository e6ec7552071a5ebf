"""Checkpoint container: one JSON header line + named float32 blocks.

The header carries arbitrary JSON metadata plus the name and shape of
every parameter block; block data follows in header order as row-major
little-endian 32-bit floats. Writing is deterministic (sorted JSON keys,
insertion-ordered blocks) so identical state produces identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from math import prod

import numpy as np

from .errors import DataError

FORMAT_NAME = "repunct-ckpt"
FORMAT_VERSION = 1


def save_blocks(path: str, meta: dict, blocks: dict[str, np.ndarray]) -> None:
    """Write metadata and named arrays as one self-contained file."""
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "meta": meta,
        "blocks": [
            {"name": name, "shape": list(arr.shape)}
            for name, arr in blocks.items()
        ],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for arr in blocks.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_blocks(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a file written by save_blocks; arrays come back float32."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not a checkpoint file ({exc})") from None
        if header.get("format") != FORMAT_NAME:
            raise DataError(f"{path}: unexpected format {header.get('format')!r}")
        if header.get("version") != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported version {header.get('version')!r}")
        blocks: dict[str, np.ndarray] = {}
        for spec in header["blocks"]:
            shape = tuple(int(s) for s in spec["shape"])
            nbytes = prod(shape) * 4 if shape else 4
            buf = fh.read(nbytes)
            if len(buf) != nbytes:
                raise DataError(f"{path}: truncated block {spec['name']!r}")
            blocks[spec["name"]] = (
                np.frombuffer(buf, dtype="<f4").reshape(shape).copy()
            )
    return header["meta"], blocks


def sha256_file(path: str) -> str:
    """Hex digest of a file's contents, for run manifests."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
