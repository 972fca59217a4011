"""Flat-file formats.

GridSet text form::

    gridset d=2 M=4 depth=4 count=4096 [reference_dim=1.5]
    i j
    ...

GridSet binary form (little endian): magic ``RPGS``, ``u1`` version, ``u1``
d, ``u2`` reserved, ``u4`` M, ``u4`` depth, ``u8`` count, ``f8``
reference_dim (NaN if unknown), then ``count * d`` ``i8`` indices.

Profiles are ``scale,value`` CSV files with a JSON sidecar of the same stem.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .analysis import DimensionEstimate, ExponentProfile, make_profile
from .construct import GridSet, ProjectionFamily
from .projection import MmpReport

PathLike = Union[str, Path]

MAGIC = b"RPGS"
VERSION = 1
_HEADER = struct.Struct("<4sBBHIIQd")


class FormatError(ValueError):
    """A file does not follow the expected layout."""


def _num(x) -> str:
    return repr(float(x))


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def sha256_file(path: PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# --- grid sets ----------------------------------------------------------------

def write_gridset_text(E: GridSet, path: PathLike) -> Path:
    path = Path(path)
    header = f"gridset d={E.dim} M={E.base} depth={E.depth} count={len(E)}"
    if E.reference_dim is not None:
        header += f" reference_dim={_num(E.reference_dim)}"
    lines = [header] + [" ".join(str(int(v)) for v in row) for row in E.indices]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_gridset_text(path: PathLike) -> GridSet:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith("gridset "):
        raise FormatError(f"{path}:1: missing 'gridset' header")
    fields = {}
    for tok in lines[0].split()[1:]:
        key, sep, val = tok.partition("=")
        if not sep:
            raise FormatError(f"{path}:1: bad header field {tok!r}")
        fields[key] = val
    try:
        d, M, depth, count = (int(fields[k]) for k in ("d", "M", "depth", "count"))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}:1: incomplete header") from exc
    ref = float(fields["reference_dim"]) if "reference_dim" in fields else None
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != d:
            raise FormatError(f"{path}:{lineno}: expected {d} indices")
        try:
            rows.append([int(p) for p in parts])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: non-integer index") from exc
    if len(rows) != count:
        raise FormatError(f"{path}: header count {count} but {len(rows)} rows")
    return GridSet(d, M, depth, np.array(rows, dtype=np.int64).reshape(-1, d), ref)


def write_gridset_binary(E: GridSet, path: PathLike) -> Path:
    path = Path(path)
    ref = math.nan if E.reference_dim is None else E.reference_dim
    head = _HEADER.pack(MAGIC, VERSION, E.dim, 0, E.base, E.depth, len(E), ref)
    path.write_bytes(head + E.indices.astype("<i8").tobytes())
    return path


def read_gridset_binary(path: PathLike) -> GridSet:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, d, _, M, depth, count, ref = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    body = data[_HEADER.size:]
    if len(body) != 8 * count * d:
        raise FormatError(f"{path}: expected {count * d} indices")
    idx = np.frombuffer(body, dtype="<i8").reshape(count, d)
    return GridSet(d, M, depth, idx, None if math.isnan(ref) else ref)


# --- families -----------------------------------------------------------------

def write_family_csv(G: ProjectionFamily, path: PathLike) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["x", "y", "z", "weight"])
        for v, wt in zip(G.directions, G.weights):
            w.writerow([_num(v[0]), _num(v[1]), _num(v[2]), _num(wt)])
    return path


def read_family_csv(path: PathLike) -> ProjectionFamily:
    rows = _read_numeric_csv(path, ["x", "y", "z", "weight"])
    return ProjectionFamily(rows[:, :3], rows[:, 3])


# --- profiles -----------------------------------------------------------------

def _read_numeric_csv(path: PathLike, columns) -> np.ndarray:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}:1: empty file") from None
        if [h.strip() for h in header] != columns:
            raise FormatError(f"{path}:1: expected header {','.join(columns)}")
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(columns):
                raise FormatError(f"{path}:{reader.line_num}: expected {len(columns)} fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise FormatError(f"{path}:{reader.line_num}: non-numeric field") from None
    return np.array(rows, dtype=float).reshape(-1, len(columns))


def profile_summary(profile: ExponentProfile) -> dict:
    return {
        "slope": None if math.isnan(profile.slope) else profile.slope,
        "r2": None if math.isnan(profile.r2) else profile.r2,
        "intercept": None if math.isnan(profile.intercept) else profile.intercept,
        "num_scales": len(profile.scales),
        "params": profile.params,
    }


def write_profile(profile: ExponentProfile, path: PathLike, **extra) -> Path:
    """Write ``<stem>.csv`` and the ``<stem>.json`` sidecar; returns the CSV path."""
    path = Path(path).with_suffix(".csv")
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["scale", "value"])
        for s, v in zip(profile.scales, profile.values):
            w.writerow([_num(s), _num(v)])
    meta = profile_summary(profile)
    meta.update(extra)
    path.with_suffix(".json").write_text(dumps_json(meta))
    return path


def read_profile(path: PathLike) -> ExponentProfile:
    """Read a profile CSV, refitting it; malformed rows raise :class:`FormatError`."""
    rows = _read_numeric_csv(path, ["scale", "value"])
    if len(rows) == 0:
        raise FormatError(f"{path}: empty profile, nothing to read")
    sidecar = Path(path).with_suffix(".json")
    params = json.loads(sidecar.read_text()).get("params", {}) if sidecar.exists() else {}
    return make_profile(rows[:, 0], rows[:, 1], **params)


def dimension_summary(est: DimensionEstimate) -> dict:
    return {"slope": est.slope, "r2": est.r2, "halfwidth": est.halfwidth,
            "scales": est.scales, "counts": est.counts}


# --- projection experiments ---------------------------------------------------

def write_mmp_report(report: MmpReport, stem: PathLike):
    stem = Path(stem)
    doc = {
        "mode": report.mode,
        "reference": report.reference,
        "pass_fraction": report.pass_fraction,
        "passed": report.passed,
        "quantiles": report.quantiles() if report.records else {},
        "config": report.config,
        "records": [vars(r) for r in report.records],
    }
    json_path = stem.with_suffix(".json")
    json_path.write_text(dumps_json(doc))
    csv_path = stem.with_suffix(".csv")
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["index", "x", "y", "z", "estimate", "passed"])
        for r in report.records:
            w.writerow([r.index, *(_num(v) for v in r.direction), _num(r.estimate), int(r.passed)])
    return json_path, csv_path
