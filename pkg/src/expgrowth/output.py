"""On-disk artifacts: checkpoints, snapshot CSVs and metadata sidecars."""
from __future__ import annotations

import csv
import hashlib
import json
import os
import platform

import numpy as np

from .field import Grid, SpectralField

__all__ = [
    "CHECKPOINT_FORMAT",
    "CHECKPOINT_VERSION",
    "write_checkpoint",
    "read_checkpoint",
    "write_profile_csv",
    "write_spectrum_csv",
    "write_snapshot",
    "write_sidecar",
    "config_hash",
]

CHECKPOINT_FORMAT = "expgrowth-checkpoint"
CHECKPOINT_VERSION = 1


def write_checkpoint(path, field, t, dt, meta=None):
    """Save the physical samples plus grid, time and step size to ``.npz``."""
    g = field.grid
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "dim": g.dim,
        "n": g.n,
        "length": g.length,
        "t": float(t),
        "dt": float(dt),
        "meta": meta or {},
    }
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, default=_jsonable)), physical=field.physical)
    os.replace(tmp, path)


def read_checkpoint(path):
    """Inverse of :func:`write_checkpoint`: returns ``(field, t, dt, meta)``."""
    with np.load(path, allow_pickle=False) as data:
        try:
            header = json.loads(str(data["header"]))
        except KeyError:
            raise ValueError(f"{path}: not a checkpoint (no header)") from None
        phys = np.array(data["physical"])
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: unknown format {header.get('format')!r}")
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
    grid = Grid(int(header["dim"]), int(header["n"]), float(header["length"]))
    return SpectralField.from_physical(grid, phys), header["t"], header["dt"], header["meta"]


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def write_profile_csv(path, field):
    """Columns x (and y in 2D), h."""
    g = field.grid
    coords = [c.ravel() for c in g.coords]
    names = ["x", "y"][: g.dim] + ["h"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*coords, field.physical.ravel()):
            w.writerow([repr(float(v)) for v in row])


def write_spectrum_csv(path, field):
    """Columns k (|k|; kx, ky in 2D), abs_hhat; nonnegative frequencies in 1D."""
    g = field.grid
    a = np.abs(field.spectral)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if g.dim == 1:
            w.writerow(["k", "abs_hhat"])
            keep = g.integer_wavenumbers[0] >= 0
            for k, v in zip(g.wavenumbers[0][keep], a[keep]):
                w.writerow([repr(float(k)), repr(float(v))])
        else:
            w.writerow(["kx", "ky", "k", "abs_hhat"])
            kx, ky = g.wavenumbers
            for row in zip(kx.ravel(), ky.ravel(), g.kmag.ravel(), a.ravel()):
                w.writerow([repr(float(v)) for v in row])


def write_snapshot(directory, field, t, index):
    """Profile and spectrum CSVs for one output time; returns the two paths."""
    stem = os.path.join(directory, f"snapshot_{index:04d}")
    paths = (f"{stem}_profile.csv", f"{stem}_spectrum.csv")
    write_profile_csv(paths[0], field)
    write_spectrum_csv(paths[1], field)
    return paths


def config_hash(text):
    return hashlib.sha256(text.encode()).hexdigest()


def write_sidecar(csv_path, config_text, extra=None):
    """``<csv>.meta.json`` naming the config hash that produced ``csv_path``."""
    from . import __version__

    meta = {
        "file": os.path.basename(csv_path),
        "config_sha256": config_hash(config_text),
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    meta.update(extra or {})
    path = f"{csv_path}.meta.json"
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_jsonable)
    return path
