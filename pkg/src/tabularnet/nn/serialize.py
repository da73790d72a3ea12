"""Deterministic parameter archives: a zip of ``.npy`` arrays plus a JSON metadata entry."""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


def save_archive(path: str | Path, arrays: dict[str, np.ndarray], metadata: dict) -> None:
    """Write ``arrays`` and ``metadata``; identical inputs give identical bytes."""
    meta = dict(metadata, format_version=FORMAT_VERSION, arrays=sorted(arrays))
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        info = zipfile.ZipInfo("metadata.json", date_time=_EPOCH)
        zf.writestr(info, json.dumps(meta, sort_keys=True, indent=1))
        for name in sorted(arrays):
            buf = io.BytesIO()
            arr = np.asarray(arrays[name])  # ascontiguousarray would turn 0-d scalars into 1-d
            np.lib.format.write_array(buf, arr if arr.flags.c_contiguous else arr.copy(order="C"),
                                      allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"arrays/{name}.npy", date_time=_EPOCH), buf.getvalue())


def load_archive(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("metadata.json"))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported archive version {meta.get('format_version')}")
        arrays = {
            name: np.lib.format.read_array(io.BytesIO(zf.read(f"arrays/{name}.npy")), allow_pickle=False)
            for name in meta["arrays"]
        }
    return arrays, meta
