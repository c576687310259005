"""Plain-text, CSV and JSON formats.

Every file starts with a ``# metricgeom <kind> v1`` header line.  Floats
are written with ``repr`` so that reading a file back is lossless.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .metric import DomainError, FiniteMetricSpace, PointMap

VERSION = 1


class FormatError(DomainError):
    """A data file does not follow its declared format."""


def header(kind: str) -> str:
    return f"# metricgeom {kind} v{VERSION}"


def _data_lines(path, kind: str) -> list[str]:
    lines = Path(path).read_text().splitlines()
    if lines and lines[0].startswith("#"):
        parts = lines[0][1:].split()
        if len(parts) == 3 and parts[0] == "metricgeom":
            if parts[1] != kind:
                raise FormatError(f"{path}: expected a {kind} file, found {parts[1]}")
            if parts[2] != f"v{VERSION}":
                raise FormatError(f"{path}: unsupported {kind} version {parts[2]}")
    return [ln for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]


def _floats(tokens, path, lineno) -> list[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise FormatError(f"{path}:{lineno}: expected numbers, got {' '.join(tokens)!r}") from None


def _fmt(x: float) -> str:
    return repr(float(x))


def read_distance_matrix(path) -> FiniteMetricSpace:
    """First line ``n``, then ``n`` rows of ``n`` numbers; metric axioms are checked on load."""
    lines = _data_lines(path, "distance-matrix")
    if not lines:
        raise FormatError(f"{path}: empty distance matrix file")
    try:
        n = int(lines[0])
    except ValueError:
        raise FormatError(f"{path}: first line must be the point count") from None
    if n < 1 or len(lines) != n + 1:
        raise FormatError(f"{path}: expected {n} matrix rows, found {len(lines) - 1}")
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        r = _floats(ln.split(), path, i)
        if len(r) != n:
            raise FormatError(f"{path}:{i}: expected {n} entries, found {len(r)}")
        rows.append(r)
    return FiniteMetricSpace(np.array(rows))


def write_distance_matrix(path, X: FiniteMetricSpace) -> None:
    out = [header("distance-matrix"), str(X.n)]
    out += [" ".join(_fmt(v) for v in row) for row in X.dist]
    Path(path).write_text("\n".join(out) + "\n")


def write_point_map(path, f: PointMap) -> None:
    """One line per point: ``label v1 ... vN``."""
    out = [header("point-map")]
    out += [" ".join([str(lab)] + [_fmt(v) for v in row]) for lab, row in zip(f.domain.labels, f.image)]
    Path(path).write_text("\n".join(out) + "\n")


def read_point_map(path, X: FiniteMetricSpace) -> PointMap:
    """Read a point map over ``X``; labels are matched by their string form."""
    lines = _data_lines(path, "point-map")
    by_label = {}
    dim = None
    for i, ln in enumerate(lines, start=1):
        tok = ln.split()
        if len(tok) < 2:
            raise FormatError(f"{path}:{i}: expected a label and at least one coordinate")
        vec = _floats(tok[1:], path, i)
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise FormatError(f"{path}:{i}: expected {dim} coordinates, found {len(vec)}")
        if tok[0] in by_label:
            raise FormatError(f"{path}:{i}: duplicate label {tok[0]!r}")
        by_label[tok[0]] = vec
    names = [str(lab) for lab in X.labels]
    missing = [s for s in names if s not in by_label]
    if missing or len(by_label) != len(names):
        raise FormatError(f"{path}: labels do not match the domain (missing {missing[:3]})")
    return PointMap(X, np.array([by_label[s] for s in names]))


def read_cloud(path) -> np.ndarray:
    """One point per line, ``k`` coordinates each."""
    lines = _data_lines(path, "cloud")
    pts = [_floats(ln.split(), path, i) for i, ln in enumerate(lines, start=1)]
    if not pts or len({len(p) for p in pts}) != 1:
        raise FormatError(f"{path}: cloud rows must be nonempty and of equal length")
    return np.array(pts)


def write_cloud(path, points: np.ndarray) -> None:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = [header("cloud")] + [" ".join(_fmt(v) for v in row) for row in pts]
    Path(path).write_text("\n".join(out) + "\n")


def _csv_value(v):
    if isinstance(v, float):
        return "infinity" if math.isinf(v) else repr(v)
    if isinstance(v, (tuple, list, np.ndarray)):
        return " ".join(str(_csv_value(x)) for x in v)
    if isinstance(v, (np.floating, np.integer)):
        return _csv_value(v.item())
    return v


def write_csv(path, kind: str, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header(kind) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_csv_value(v) for v in r])


def read_csv(path, kind: str) -> tuple[list[str], list[list[str]]]:
    lines = _data_lines(path, kind)
    rows = list(csv.reader(lines))
    if not rows:
        raise FormatError(f"{path}: missing CSV header")
    return rows[0], rows[1:]


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _jsonable(o):
    # JSON has no infinity; spell it out
    if isinstance(o, float) and math.isinf(o):
        return "infinity" if o > 0 else "-infinity"
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return _jsonable(o.item())
    return o


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, default=_json_default)


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj) + "\n")
