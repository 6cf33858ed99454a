"""Versioned checkpoint container: JSON config header + named arrays.

Layout: a ZIP archive holding `header.json` plus one `arrays/<name>.npy`
entry per array. The header records format version, a kind tag, the model
config, and per-array shape/dtype/CRC so loads can detect truncation or
corruption and name the offending section. Writes are deterministic
(fixed timestamps), so identical state produces identical files.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import zipfile
import zlib
from pathlib import Path

import numpy as np
import torch

from llmdiff.errors import CheckpointIntegrityError

FORMAT_VERSION = 1
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


def _contiguous(arr) -> np.ndarray:
    # np.ascontiguousarray would promote 0-dim scalars to 1-dim.
    arr = np.asarray(arr)
    return arr if arr.flags.c_contiguous else np.ascontiguousarray(arr)


def save_checkpoint(path, kind: str, config: dict, arrays: dict) -> None:
    path = Path(path)
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": config,
        "arrays": {},
    }
    blobs = {}
    for name in sorted(arrays):
        arr = _contiguous(arrays[name])
        buf = io.BytesIO()
        np.save(buf, arr)
        blob = buf.getvalue()
        blobs[name] = blob
        header["arrays"][name] = {
            "shape": list(arr.shape),
            "dtype": str(arr.dtype),
            "crc32": zlib.crc32(blob),
        }
    tmp = path.with_suffix(path.suffix + ".tmp")
    with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr(
            zipfile.ZipInfo("header.json", date_time=_ZIP_DATE),
            json.dumps(header, sort_keys=True, indent=1),
        )
        for name in sorted(blobs):
            zf.writestr(zipfile.ZipInfo(f"arrays/{name}.npy", date_time=_ZIP_DATE), blobs[name])
    os.replace(tmp, path)


def load_checkpoint(path, expected_kind: str | None = None,
                    expected_config: dict | None = None) -> tuple:
    """Returns (kind, config, arrays); raises CheckpointIntegrityError on damage."""
    path = Path(path)
    try:
        zf = zipfile.ZipFile(path)
    except (zipfile.BadZipFile, FileNotFoundError, OSError) as exc:
        raise CheckpointIntegrityError(f"unreadable checkpoint container {path}: {exc}") from exc
    with zf:
        names = set(zf.namelist())
        if "header.json" not in names:
            raise CheckpointIntegrityError(f"{path}: missing header.json")
        try:
            header = json.loads(zf.read("header.json"))
        except (json.JSONDecodeError, zlib.error, zipfile.BadZipFile) as exc:
            raise CheckpointIntegrityError(f"{path}: corrupt header.json") from exc
        if header.get("format_version") != FORMAT_VERSION:
            raise CheckpointIntegrityError(
                f"{path}: unsupported format version {header.get('format_version')}"
            )
        kind = header.get("kind")
        if expected_kind is not None and kind != expected_kind:
            raise CheckpointIntegrityError(
                f"{path}: checkpoint kind {kind!r} does not match expected {expected_kind!r}"
            )
        config = header.get("config", {})
        if expected_config is not None:
            for key, value in expected_config.items():
                if config.get(key) != value:
                    raise CheckpointIntegrityError(
                        f"{path}: config header mismatch on {key!r}: "
                        f"{config.get(key)!r} != {value!r}"
                    )
        arrays = {}
        for name, meta in header["arrays"].items():
            entry = f"arrays/{name}.npy"
            if entry not in names:
                raise CheckpointIntegrityError(f"{path}: missing array {name!r}")
            try:
                blob = zf.read(entry)
            except (zipfile.BadZipFile, zlib.error) as exc:
                raise CheckpointIntegrityError(f"{path}: unreadable array {name!r}") from exc
            if zlib.crc32(blob) != meta["crc32"]:
                raise CheckpointIntegrityError(f"{path}: corrupt array {name!r}")
            arr = np.load(io.BytesIO(blob))
            if list(arr.shape) != meta["shape"] or str(arr.dtype) != meta["dtype"]:
                raise CheckpointIntegrityError(
                    f"{path}: array {name!r} does not match its header entry"
                )
            arrays[name] = arr
    return kind, config, arrays


def arrays_checksum(arrays: dict) -> str:
    """Canonical content hash of named arrays (order-insensitive)."""
    h = hashlib.sha256()
    for name in sorted(arrays):
        arr = _contiguous(arrays[name])
        h.update(name.encode())
        h.update(str(arr.dtype).encode())
        h.update(str(arr.shape).encode())
        h.update(arr.tobytes())
    return h.hexdigest()


# -- torch bridges -----------------------------------------------------------

def module_arrays(module: torch.nn.Module) -> dict:
    return {k: v.detach().cpu().numpy() for k, v in module.state_dict().items()}


def load_module_arrays(module: torch.nn.Module, arrays: dict) -> None:
    state = module.state_dict()
    if set(state) != set(arrays):
        missing = sorted(set(state) - set(arrays))
        extra = sorted(set(arrays) - set(state))
        raise CheckpointIntegrityError(
            f"state mismatch (missing {missing}, unexpected {extra})"
        )
    module.load_state_dict(
        {k: torch.from_numpy(_contiguous(v).copy()) for k, v in arrays.items()}
    )


def module_checksum(module: torch.nn.Module) -> str:
    return arrays_checksum(module_arrays(module))


def optimizer_arrays(optimizer: torch.optim.Optimizer) -> dict:
    """Flatten Adam state into named arrays, indexed by parameter order."""
    out = {}
    i = 0
    for group in optimizer.param_groups:
        for p in group["params"]:
            state = optimizer.state.get(p, {})
            for key, value in state.items():
                arr = value.detach().cpu().numpy() if torch.is_tensor(value) \
                    else np.asarray(value)
                out[f"{i:04d}.{key}"] = arr
            i += 1
    return out


def load_optimizer_arrays(optimizer: torch.optim.Optimizer, arrays: dict) -> None:
    i = 0
    for group in optimizer.param_groups:
        for p in group["params"]:
            prefix = f"{i:04d}."
            state = {}
            for name, arr in arrays.items():
                if name.startswith(prefix):
                    key = name[len(prefix):]
                    t = torch.from_numpy(_contiguous(arr).copy())
                    state[key] = t.reshape(()) if arr.ndim == 0 else t
            if state:
                optimizer.state[p] = state
            i += 1
