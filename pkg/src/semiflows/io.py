"""File formats: trajectory CSV with JSON sidecar, JSON and DOT writers, hashes."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .inclusion import TrajectorySample


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def write_table(path, header: list[str], rows) -> Path:
    """CSV with ``repr``-exact floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])
    return path


def write_trajectory(path, traj: TrajectorySample, manifest: dict | None = None) -> tuple[Path, Path]:
    """``t,state_0,...`` CSV plus a ``.json`` sidecar holding ``manifest``."""
    path = Path(path)
    n = traj.states.shape[1]
    header = ["t"] + [f"state_{i}" for i in range(n)]
    rows = np.column_stack([traj.times, traj.states])
    write_table(path, header, rows.tolist())
    side = path.with_suffix(".json")
    meta = {"step": traj.step, "dimension": n, "n_samples": len(traj.times), **traj.meta,
            **(manifest or {})}
    write_json(side, meta)
    return path, side


def read_trajectory(path) -> tuple[TrajectorySample, dict]:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta = read_json(path.with_suffix(".json"))
    traj = TrajectorySample(data[:, 0], data[:, 1:], np.zeros((len(data) - 1, 0)),
                            float(meta["step"]), meta=meta)
    return traj, meta


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def dot_digraph(name: str, nodes, edges, labels: dict | None = None) -> str:
    labels = labels or {}
    lines = [f"digraph {name} {{"]
    for v in nodes:
        lab = labels.get(v)
        lines.append(f'  "{v}"' + (f' [label="{lab}"];' if lab is not None else ";"))
    for a, b in edges:
        lines.append(f'  "{a}" -> "{b}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
