"""Reading capture data and geometry, writing and reading traces.

Formats:

* capture histories (M_h): headerless CSV of 0/1, one row per individual;
* SECR detections: long CSV with header ``individual,detector,occasion``
  (1-based ids);
* detectors and mask: CSV with header ``id,x_km,y_km``;
* traces: one CSV per chain with a header of monitored names, floats in
  shortest round-trip form, plus a JSON sidecar.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .model import CaptureData, DataError, SurveyGeometry
from .samplers.core import Trace

INT_COLUMNS = ("N",)


def read_histories(path: str | Path) -> CaptureData:
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([int(c) for c in row])
            except ValueError:
                raise DataError(f"{path}:{lineno}: expected 0/1 entries") from None
    if not rows:
        raise DataError(f"{path}: no capture histories")
    if len({len(r) for r in rows}) != 1:
        raise DataError(f"{path}: rows have different numbers of occasions")
    return CaptureData(np.array(rows))


def write_histories(data: CaptureData, path: str | Path) -> None:
    if data.spatial:
        raise DataError("use write_detections for SECR data")
    np.savetxt(path, data.histories, fmt="%d", delimiter=",")


def read_points(path: str | Path) -> np.ndarray:
    """Coordinates from an ``id,x_km,y_km`` CSV, ordered by id."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"id", "x_km", "y_km"} <= set(reader.fieldnames):
            raise DataError(f"{path}: expected header id,x_km,y_km")
        recs = []
        for lineno, r in enumerate(reader, 2):
            try:
                recs.append((int(r["id"]), float(r["x_km"]), float(r["y_km"])))
            except (TypeError, ValueError):
                raise DataError(f"{path}:{lineno}: malformed row") from None
    if not recs:
        raise DataError(f"{path}: no points")
    recs.sort()
    ids = [r[0] for r in recs]
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate ids")
    return np.array([(x, y) for _, x, y in recs])


def write_points(points: np.ndarray, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x_km", "y_km"])
        for i, (x, y) in enumerate(points, 1):
            w.writerow([i, repr(float(x)), repr(float(y))])


def read_geometry(detectors: str | Path, mask: str | Path, cell_area: float) -> SurveyGeometry:
    return SurveyGeometry(read_points(detectors), read_points(mask), cell_area)


def read_detections(path: str | Path, n_detectors: int, T: int) -> CaptureData:
    """n x J x T histories from ``individual,detector,occasion`` rows (1-based)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"individual", "detector", "occasion"} <= set(reader.fieldnames):
            raise DataError(f"{path}: expected header individual,detector,occasion")
        recs = []
        for lineno, r in enumerate(reader, 2):
            try:
                recs.append((int(r["individual"]), int(r["detector"]), int(r["occasion"])))
            except (TypeError, ValueError):
                raise DataError(f"{path}:{lineno}: malformed row") from None
    if not recs:
        raise DataError(f"{path}: no detections")
    arr = np.array(recs)
    if (arr < 1).any() or arr[:, 1].max() > n_detectors or arr[:, 2].max() > T:
        raise DataError(f"{path}: ids out of range (detectors 1..{n_detectors}, occasions 1..{T})")
    ids = np.unique(arr[:, 0])
    index = {v: k for k, v in enumerate(ids)}
    x = np.zeros((len(ids), n_detectors, T), dtype=np.int8)
    for i, j, t in recs:
        x[index[i], j - 1, t - 1] = 1
    return CaptureData(x)


def write_detections(data: CaptureData, path: str | Path) -> None:
    if not data.spatial:
        raise DataError("write_detections needs SECR data")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["individual", "detector", "occasion"])
        for i, j, t in zip(*np.nonzero(data.histories)):
            w.writerow([i + 1, j + 1, t + 1])


def _fmt(name: str, v) -> str:
    return str(int(v)) if name in INT_COLUMNS else repr(float(v))


def write_trace(trace: Trace, path: str | Path, sidecar: dict | None = None) -> None:
    """Trace CSV plus ``<path>.json`` with chain metadata and ``sidecar``."""
    path = Path(path)
    names = trace.names
    cols = [trace[k] for k in names]
    with path.open("w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(k, v) for k, v in zip(names, row)) + "\n")
    meta = {
        "chain": trace.chain,
        "seed": trace.seed,
        "burn_in": trace.burn_in,
        "thin": trace.thin,
        "acceptance": trace.acceptance,
        "wall_seconds": trace.wall_seconds,
    }
    meta.update(sidecar or {})
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_suffix(path.suffix + ".json")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


def read_trace(path: str | Path) -> Trace:
    path = Path(path)
    with path.open(newline="") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    samples = {}
    for j, name in enumerate(header):
        col = [r[j] for r in rows]
        if name in INT_COLUMNS:
            samples[name] = np.array([int(v) for v in col], dtype=np.int64)
        else:
            samples[name] = np.array([float(v) for v in col])
    meta = {}
    sp = sidecar_path(path)
    if sp.exists():
        meta = json.loads(sp.read_text())
    return Trace(samples, int(meta.get("chain", 0)), int(meta.get("seed", 0)),
                 int(meta.get("burn_in", 0)), int(meta.get("thin", 1)),
                 dict(meta.get("acceptance", {})), float(meta.get("wall_seconds", 0.0)))
