"""Named-tensor binary container: "PCSW1" magic, JSON header, raw payload.

Layout: 5 magic bytes, an 8-byte little-endian header length, the UTF-8 JSON
header, then the concatenated little-endian float64 tensor payloads. The
header carries tensor names, shapes, dtype and byte offsets plus a free-form
``meta`` mapping (used for architecture descriptors). Round trips are
bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"PCSW1"


class ContainerError(ValueError):
    """Malformed, truncated, or incompatible tensor container."""


def save_tensors(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    offset = 0
    blobs = []
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype=np.float64)
        blob = arr.astype("<f8", copy=False).tobytes()  # tobytes emits C order
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": "<f8",
            "offset": offset,
            "nbytes": len(blob),
        })
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"meta": meta or {}, "tensors": entries}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_tensors(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 8:
        raise ContainerError(f"{path}: truncated container (only {len(raw)} bytes)")
    if raw[: len(MAGIC)] != MAGIC:
        raise ContainerError(f"{path}: bad magic {raw[:len(MAGIC)]!r}, expected {MAGIC!r}")
    (hlen,) = struct.unpack_from("<Q", raw, len(MAGIC))
    body = len(MAGIC) + 8
    if len(raw) < body + hlen:
        raise ContainerError(f"{path}: truncated header ({len(raw) - body} of {hlen} bytes)")
    try:
        header = json.loads(raw[body : body + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"{path}: corrupt JSON header: {exc}") from exc
    payload = raw[body + hlen :]
    tensors = {}
    for ent in header.get("tensors", []):
        if ent.get("dtype") != "<f8":
            raise ContainerError(f"{path}: unsupported dtype {ent.get('dtype')!r}")
        lo, n = ent["offset"], ent["nbytes"]
        if lo + n > len(payload):
            raise ContainerError(f"{path}: truncated payload for tensor {ent['name']!r}")
        arr = np.frombuffer(payload[lo : lo + n], dtype="<f8").astype(np.float64)
        tensors[ent["name"]] = arr.reshape(ent["shape"])
    return tensors, header.get("meta", {})
