"""CSV and manifest writers.

CSV files are written with a fixed column order and ``repr``-exact floats
so that rerunning a manifest yields byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import sys
from importlib import metadata
from pathlib import Path

import numpy as np


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return json.dumps(np.asarray(v).tolist())
    return str(v)


def write_csv(rows, path, columns=None) -> Path:
    """Write dict rows; columns default to the union of keys in first-seen order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c, "")) for c in columns])
    return path


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def long_format(rows, id_cols, value_cols) -> list:
    """Melt wide rows into ``(*id_cols, measure, value)`` rows."""
    out = []
    for r in rows:
        for c in value_cols:
            if c in r:
                out.append({**{k: r[k] for k in id_cols}, "measure": c, "value": r[c]})
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def config_hash(d: dict) -> str:
    blob = json.dumps(_jsonable(d), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def versions() -> dict:
    out = {"python": sys.version.split()[0], "platform": platform.platform()}
    for pkg in ("numpy", "scipy", "numba", "critnet"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def write_manifest(out_dir, command: str, args: dict, plan: dict, files, extra=None) -> Path:
    """Record what was run, with which settings and seeds, and what it produced."""
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "args": _jsonable(args),
        "plan": _jsonable(plan),
        "config_hash": config_hash(plan),
        "versions": versions(),
        "files": sorted(str(Path(f).relative_to(out_dir)) for f in files),
    }
    if extra:
        manifest.update(_jsonable(extra))
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
