"""Content hashing and manifest helpers shared by the pipeline stages.

Datasets, basis sets, weights and reports are chained by sha256 hashes of the
canonical material/load JSON so downstream commands can refuse mismatched
inputs (e.g. a basis generated for a different load than the dataset).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def content_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:16]


def write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


class ManifestMismatch(RuntimeError):
    """Hash chain broken between pipeline artifacts."""


def check_chain(name_a: str, meta_a: dict, name_b: str, meta_b: dict, keys=("material_hash", "load_hash")) -> None:
    for key in keys:
        if meta_a.get(key) != meta_b.get(key):
            raise ManifestMismatch(
                f"{name_a} and {name_b} disagree on {key}: "
                f"{meta_a.get(key)!r} vs {meta_b.get(key)!r}")
