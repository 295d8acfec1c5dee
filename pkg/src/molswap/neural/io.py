"""Weight and checkpoint serialization.

Weights file: JSON {version, variant, tensors: [{name, shape, values}]}
with row-major float32 values. Serialization is deterministic, so
save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from ..errors import CorruptFile, VersionMismatch
from .model import FORMAT_VERSION, ModelWeights, expected_shapes


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def weights_to_json(w: ModelWeights) -> str:
    doc = {
        "version": w.version,
        "variant": w.variant,
        "tensors": [
            {
                "name": name,
                "shape": list(arr.shape),
                "values": [float(x) for x in arr.astype(np.float32).ravel()],
            }
            for name, arr in sorted(w.tensors.items())
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def save_weights(w: ModelWeights, path: str | Path) -> None:
    atomic_write_text(path, weights_to_json(w))


def weights_from_json(text: str, expect_variant: str | None = None) -> ModelWeights:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"weights file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "tensors" not in doc:
        raise CorruptFile("weights file lacks a tensors section")
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"weights version {version}, expected {FORMAT_VERSION}")
    variant = doc.get("variant")
    if expect_variant is not None and variant != expect_variant:
        raise VersionMismatch(
            f"weights variant {variant!r}, expected {expect_variant!r}"
        )
    try:
        shapes = expected_shapes(variant)
    except Exception as exc:
        raise CorruptFile(f"unknown variant {variant!r}") from exc
    tensors: dict[str, np.ndarray] = {}
    for entry in doc["tensors"]:
        try:
            name = entry["name"]
            shape = tuple(entry["shape"])
            values = np.asarray(entry["values"], dtype=np.float32).reshape(shape)
        except Exception as exc:
            raise CorruptFile(f"malformed tensor entry: {exc}") from exc
        tensors[name] = values
    missing = set(shapes) - set(tensors)
    extra = set(tensors) - set(shapes)
    if missing or extra:
        raise CorruptFile(
            f"tensor names do not match the {variant} schema"
            f" (missing {sorted(missing)[:3]}, extra {sorted(extra)[:3]})"
        )
    for name, shape in shapes.items():
        if tensors[name].shape != tuple(shape):
            raise CorruptFile(
                f"tensor {name} has shape {tensors[name].shape}, expected {shape}"
            )
    return ModelWeights(variant, tensors, version)


def load_weights(path: str | Path, expect_variant: str | None = None) -> ModelWeights:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CorruptFile(f"cannot read weights file: {exc}") from exc
    return weights_from_json(text, expect_variant)
