"""Versioned CSV and JSON files for measures, samples, densities and tables.

Every CSV starts with a comment line ``# meanfield-ldp <kind> v<version> ...``
and stores floats with 17 significant digits, so values round-trip
exactly. Structured metadata goes into JSON (sorted keys) either as a
standalone file or as a sidecar ``<file>.json`` next to a CSV.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .densities import GridDensity
from .errors import InvalidArgumentError, MeanFieldError
from .measures import EmpiricalMeasure
from .sampler import SampleSet, SamplerConfig
from .spt import CapitalCurve

__all__ = [
    "FORMAT_VERSION",
    "FileFormatError",
    "dump_json",
    "load_json",
    "write_measure_csv",
    "read_measure_csv",
    "write_measure_json",
    "read_measure_json",
    "read_measure",
    "write_samples",
    "read_samples",
    "write_density",
    "read_density",
    "write_curve",
    "read_curve",
    "write_table",
    "read_table",
    "read_weights_csv",
]

FORMAT_VERSION = 1
_FMT = "%.17g"


class FileFormatError(MeanFieldError, ValueError):
    """A file does not follow the expected layout or version."""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dump_json(obj, path) -> Path:
    """Write ``obj`` as deterministic JSON (sorted keys, non-finite floats as strings)."""
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def load_json(path) -> dict:
    return json.loads(Path(path).read_text())


def _sidecar(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _header(kind, **fields):
    extra = " ".join(f"{k}={v}" for k, v in fields.items())
    return f"# meanfield-ldp {kind} v{FORMAT_VERSION}" + (f" {extra}" if extra else "")


def _parse_header(line, kind):
    parts = line.strip().lstrip("#").split()
    if len(parts) < 3 or parts[0] != "meanfield-ldp" or parts[1] != kind:
        raise FileFormatError(f"expected a '{kind}' file, found header {line.strip()!r}")
    if parts[2] != f"v{FORMAT_VERSION}":
        raise FileFormatError(f"unsupported {kind} format version {parts[2]!r}")
    return dict(p.split("=", 1) for p in parts[3:])


def _write_matrix(path, kind, A, columns=None, **fields):
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(_header(kind, **fields) + "\n")
        if columns:
            fh.write(",".join(columns) + "\n")
        if A.size:
            np.savetxt(fh, A, fmt=_FMT, delimiter=",")
    return path


def _read_matrix(path, kind, columns=None):
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
        fields = _parse_header(first, kind)
        if columns:
            got = fh.readline().strip().split(",")
            if got != list(columns):
                raise FileFormatError(f"{path}: expected columns {columns}, found {got}")
        rows = [line for line in fh if line.strip()]
    if not rows:
        return np.empty((0, 0)), fields
    A = np.loadtxt(rows, delimiter=",", ndmin=2)
    return A, fields


# --------------------------------------------------------------------------- measures


def write_measure_csv(m: EmpiricalMeasure, path) -> Path:
    """One atom per row, one column per coordinate."""
    return _write_matrix(path, "measure", m.atoms, n=m.n, d=m.d)


def read_measure_csv(path) -> EmpiricalMeasure:
    A, fields = _read_matrix(path, "measure")
    d = int(fields.get("d", A.shape[1] if A.size else 1))
    if A.shape[1] != d:
        raise FileFormatError(f"{path}: header says d={d}, rows have {A.shape[1]} columns")
    return EmpiricalMeasure(A)


def write_measure_json(m: EmpiricalMeasure, path) -> Path:
    return dump_json({"schema": "meanfield-ldp/measure", "version": FORMAT_VERSION,
                      "points": m.atoms}, path)


def read_measure_json(path) -> EmpiricalMeasure:
    data = load_json(path)
    if isinstance(data, list):
        return EmpiricalMeasure.from_points(data)
    if data.get("schema") != "meanfield-ldp/measure" or data.get("version") != FORMAT_VERSION:
        raise FileFormatError(f"{path}: not a version-{FORMAT_VERSION} measure file")
    return EmpiricalMeasure.from_points(data["points"])


def read_measure(path) -> EmpiricalMeasure:
    """Read a measure from ``.json`` or CSV depending on the suffix."""
    return read_measure_json(path) if str(path).endswith(".json") else read_measure_csv(path)


# --------------------------------------------------------------------------- samples


def write_samples(s: SampleSet, path) -> Path:
    """One configuration per row (particle-major, n*d columns) plus a JSON sidecar."""
    N, n, d = s.samples.shape
    _write_matrix(path, "samples", s.samples.reshape(N, n * d), n=n, d=d)
    dump_json({"schema": "meanfield-ldp/samples", "version": FORMAT_VERSION, "model": s.model,
               "sigma2": s.sigma2, "config": s.config.to_dict(), "diagnostics": s.diagnostics}, _sidecar(path))
    return Path(path)


def _unjson(v):
    if isinstance(v, str) and v in ("inf", "-inf", "nan"):
        return float(v)
    if isinstance(v, dict):
        return {k: _unjson(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_unjson(x) for x in v]
    return v


def read_samples(path) -> SampleSet:
    A, fields = _read_matrix(path, "samples")
    n, d = int(fields["n"]), int(fields["d"])
    meta = load_json(_sidecar(path)) if _sidecar(path).exists() else {}
    X = A.reshape(-1, n, d) if A.size else np.empty((0, n, d))
    cfg = SamplerConfig(**meta["config"]) if "config" in meta else SamplerConfig(n=n, d=d)
    return SampleSet(X, cfg, meta.get("model", "unknown"), float(meta.get("sigma2", float("nan"))),
                     _unjson(meta.get("diagnostics", {})))


# --------------------------------------------------------------------------- densities


def write_density(p: GridDensity, path) -> Path:
    """Two columns (cell centre, value) plus a sidecar with the grid and model."""
    _write_matrix(path, "density", np.column_stack([p.x, p.values]), columns=("x", "value"), m=p.m)
    dump_json({"schema": "meanfield-ldp/density", "version": FORMAT_VERSION, "a": p.a, "b": p.b,
               "m": p.m, "meta": p.meta}, _sidecar(path))
    return Path(path)


def read_density(path) -> GridDensity:
    A, fields = _read_matrix(path, "density", columns=("x", "value"))
    side = _sidecar(path)
    if side.exists():
        meta = load_json(side)
        a, b = float(meta["a"]), float(meta["b"])
        extra = _unjson(meta.get("meta", {}))
    else:
        dx = A[1, 0] - A[0, 0]
        a, b, extra = A[0, 0] - dx / 2, A[-1, 0] + dx / 2, {}
    if A.shape[0] != int(fields.get("m", A.shape[0])):
        raise FileFormatError(f"{path}: row count does not match the header")
    return GridDensity(a, b, A[:, 1], extra)


# --------------------------------------------------------------------------- curves and tables


def write_curve(c: CapitalCurve, path) -> Path:
    return _write_matrix(path, "curve", np.column_stack([c.log_rank, c.log_weight]),
                         columns=("log_rank", "log_weight"))


def read_curve(path) -> CapitalCurve:
    A, _ = _read_matrix(path, "curve", columns=("log_rank", "log_weight"))
    return CapitalCurve(A[:, 0], A[:, 1])


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(records: list, path, kind: str = "table") -> Path:
    """List of flat dicts (same keys) to CSV; ``None`` becomes an empty cell."""
    path = Path(path)
    if not records:
        raise InvalidArgumentError("nothing to write")
    cols = list(records[0])
    with path.open("w", newline="") as fh:
        fh.write(_header(kind) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            w.writerow([_cell(r[c]) for c in cols])
    return path


def _parse_cell(s):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_table(path, kind: str = "table") -> list:
    with Path(path).open() as fh:
        _parse_header(fh.readline(), kind)
        return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def read_weights_csv(path) -> np.ndarray:
    """Market weights from a plain CSV: numbers in one row or one column.

    Comment lines (``#``) and a non-numeric header row are skipped; the
    weights are renormalised to sum to one.
    """
    vals = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            for tok in line.split(","):
                tok = tok.strip()
                if not tok:
                    continue
                try:
                    vals.append(float(tok))
                except ValueError:
                    if vals:
                        raise FileFormatError(f"{path}: non-numeric entry {tok!r}")
    w = np.asarray(vals, dtype=float)
    if w.size == 0 or np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise FileFormatError(f"{path}: weights must be positive finite numbers")
    return w / w.sum()

