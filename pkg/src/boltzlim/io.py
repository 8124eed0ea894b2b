"""Flat binary snapshots with a text sidecar, and schema-stamped CSV tables."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def write_snapshot(path, array: np.ndarray, **header) -> Path:
    """Write ``path`` (.bin, little-endian float64) and ``path`` with suffix .hdr."""
    path = Path(path).with_suffix(".bin")
    arr = np.ascontiguousarray(array, dtype="<f8")
    arr.tofile(path)
    lines = [f"shape = {' '.join(str(s) for s in arr.shape)}", "dtype = <f8"]
    lines += [f"{k} = {v}" for k, v in header.items()]
    path.with_suffix(".hdr").write_text("\n".join(lines) + "\n")
    return path


def read_header(path) -> dict:
    out = {}
    for line in Path(path).with_suffix(".hdr").read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def read_snapshot(path):
    hdr = read_header(path)
    shape = tuple(int(s) for s in hdr["shape"].split())
    data = np.fromfile(Path(path).with_suffix(".bin"), dtype=hdr.get("dtype", "<f8")).reshape(shape)
    return data, hdr


def write_csv(path, columns: list, rows, meta: dict | None = None) -> Path:
    """CSV with a schema comment line, optional key: value comment lines, then the header row."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema_version: {SCHEMA_VERSION}\n")
        for k, v in (meta or {}).items():
            fh.write(f"# {k}: {v}\n")
        wr = csv.writer(fh)
        wr.writerow(columns)
        for r in rows:
            wr.writerow([_fmt(x) for x in r])
    return path


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return x


def read_csv(path):
    """Return (meta, columns, rows as list of dict of str)."""
    meta, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            if ":" in line:
                k, v = line[1:].split(":", 1)
                meta[k.strip()] = v.strip()
        else:
            body.append(line)
    rd = csv.reader(body)
    try:
        cols = next(rd)
    except StopIteration:
        return meta, [], []
    return meta, cols, [dict(zip(cols, r)) for r in rd]
