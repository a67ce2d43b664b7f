"""Run artifacts: manifests, CSV tables and the merged run report."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import platform
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__

SWEEP_INDEX = "sweep.json"
RUN_FILES = ("history.csv", "depths.csv")


class MissingInputs(ValueError):
    def __init__(self, run_dir, missing: Sequence[str]):
        self.missing = list(missing)
        super().__init__(f"{run_dir}: missing {', '.join(self.missing)}")


def git_blob_hash(path) -> str:
    """Content hash as ``git hash-object`` computes it."""
    data = Path(path).read_bytes()
    h = hashlib.sha1(f"blob {len(data)}\0".encode())
    h.update(data)
    return h.hexdigest()


def jsonable(value):
    """Plain JSON value; non-finite floats become the strings ``inf``/``-inf``/``nan``."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_manifest(path, command: str, argv: Sequence[str], config: dict, inputs: Iterable) -> None:
    """Config echo plus content hashes of every input file."""
    hashes = {}
    for item in inputs:
        if item is None:
            continue
        p = Path(item)
        files = sorted(q for q in p.rglob("*") if q.is_file()) if p.is_dir() else [p]
        for q in files:
            hashes[str(q)] = git_blob_hash(q)
    write_json(
        path,
        {
            "command": command,
            "argv": list(argv),
            "config": config,
            "inputs": hashes,
            "versions": {
                "curvegnn": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
        },
    )


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            rows.append([c.strip() for c in row])
    return header, rows


def read_kappa_csv(path) -> tuple[list[str], np.ndarray]:
    """Vertex names and curvature values from a ``vertex,kappa...`` table.

    The value column is ``kappa`` or ``kappa_hat`` if present, otherwise
    the second column.
    """
    header, rows = read_rows(path)
    if len(header) < 2:
        raise ValueError(f"{path}: need a vertex column and a curvature column")
    col = next((header.index(c) for c in ("kappa", "kappa_hat") if c in header), 1)
    names, values = [], []
    for lineno, row in enumerate(rows, start=2):
        try:
            values.append(float(row[col]))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: bad curvature value {row[col]!r}") from None
        names.append(row[0])
    if not values:
        raise ValueError(f"{path}: no curvature values")
    return names, np.array(values)


def pca_2d(H: np.ndarray) -> np.ndarray:
    """First two principal-component coordinates of the rows of ``H``."""
    H = np.asarray(H, dtype=np.float64)
    C = H - H.mean(axis=0)
    U, s, _ = np.linalg.svd(C, full_matrices=False)
    out = np.zeros((H.shape[0], 2))
    r = min(2, len(s))
    out[:, :r] = U[:, :r] * s[:r]
    return out


def _float_column(header, rows, name, path) -> np.ndarray:
    if name not in header:
        raise ValueError(f"{path}: no {name!r} column")
    i = header.index(name)
    return np.array([float(r[i]) for r in rows])


def summarize_run(run_dir) -> dict:
    """Final metrics, curvature statistics and the depth histogram of one run."""
    run_dir = Path(run_dir)
    missing = [f for f in RUN_FILES if not (run_dir / f).is_file()]
    if missing:
        raise MissingInputs(run_dir, missing)
    h_header, h_rows = read_rows(run_dir / "history.csv")
    if not h_rows:
        raise ValueError(f"{run_dir / 'history.csv'}: no epochs recorded")
    final = {name: float(v) for name, v in zip(h_header, h_rows[-1]) if name != "epoch"}
    final["epochs"] = len(h_rows)
    d_header, d_rows = read_rows(run_dir / "depths.csv")
    kappa = _float_column(d_header, d_rows, "kappa_hat", run_dir / "depths.csv")
    T = _float_column(d_header, d_rows, "T", run_dir / "depths.csv").astype(np.int64)
    depths, counts = np.unique(T, return_counts=True)
    summary = {
        "final": final,
        "kappa_hat": {
            "min": float(np.min(kappa)),
            "median": float(np.median(kappa)),
            "max": float(np.max(kappa)),
        },
        "depth_histogram": {int(d): int(c) for d, c in zip(depths, counts)},
    }
    manifest = run_dir / "manifest.json"
    if manifest.is_file():
        with open(manifest, encoding="utf-8") as fh:
            summary["config"] = json.load(fh).get("config", {})
    return summary


def report(run_dir) -> dict:
    """Write ``summary.json`` (and ``sweep.csv`` for sweeps) into ``run_dir``."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise MissingInputs(run_dir, ["run directory"])
    index = run_dir / SWEEP_INDEX
    if index.is_file():
        with open(index, encoding="utf-8") as fh:
            sweep = json.load(fh)
        key = sweep["key"]
        runs, rows = [], []
        for entry in sweep["runs"]:
            s = summarize_run(run_dir / entry["dir"])
            write_json(run_dir / entry["dir"] / "summary.json", s)
            write_depth_histogram(run_dir / entry["dir"], s)
            runs.append({key: entry["value"], **s})
            f = s["final"]
            rows.append(
                [
                    entry["value"],
                    f.get("metric"),
                    f.get("val_metric"),
                    f.get("test_metric"),
                    f.get("L_task"),
                    s["kappa_hat"]["median"],
                    max(s["depth_histogram"]),
                ]
            )
        write_rows(
            run_dir / "sweep.csv",
            [key, "metric", "val_metric", "test_metric", "L_task", "kappa_hat_median", "max_T"],
            rows,
        )
        summary = {"sweep": key, "runs": runs}
    else:
        summary = summarize_run(run_dir)
        write_depth_histogram(run_dir, summary)
    write_json(run_dir / "summary.json", summary)
    return summary


def write_depth_histogram(run_dir, summary: dict) -> None:
    write_rows(
        Path(run_dir) / "depth_histogram.csv",
        ["T", "count"],
        sorted(summary["depth_histogram"].items()),
    )


def workers_default() -> int:
    raw = os.environ.get("CURVEGNN_WORKERS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"CURVEGNN_WORKERS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"CURVEGNN_WORKERS must be a positive integer, got {raw!r}")
    return n
