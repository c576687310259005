"""Command-line front end.

    metricgeom COMMAND [--config FILE.yaml] [--seed N] [--output DIR] [overrides]

Commands: ccdist, monotone, embed, verify-tube, pull, defect, collapse.
A run prints its JSON report on stdout and, with ``--output``, writes the
report and the command's data files there.  Exit status is 0 when every
check passes, 2 when the computation finished but a check failed, and 1 on
errors (reported as one JSON line on stderr).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from . import io
from .isometry import (
    TUBE_MODELS, central_collapse_ratio, curve_family, curve_length_pairs, linear_finsler_defect,
    path_isometry_defect, tube_experiment,
)
from .lipembed import default_schedule, embed
from .metric import DomainError, MetricImage, UnreachableError, pull_matrix
from .subriemannian import (
    INFINITY, MODELS, ApproximantSchedule, GridDomain, HorizontalStructure, NormFieldPlanar, StencilSolver,
    default_grid, model_catalog, monotone_convergence_report, random_grid_pairs,
)

REQUIRED = object()
SEED_LIMIT = 2**64


class ConfigError(DomainError):
    """Invalid run configuration."""


# --- value parsers -----------------------------------------------------------

def _number(v, key) -> float:
    if isinstance(v, bool):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "infinity"):
            return math.inf
        try:
            return float(Fraction(s))
        except (ValueError, ZeroDivisionError):
            pass
    raise ConfigError(f"{key}: expected a number, got {v!r}")


def _positive(v, key) -> float:
    x = _number(v, key)
    if not (x > 0 and math.isfinite(x)):
        raise ConfigError(f"{key}: must be positive and finite, got {v!r}")
    return x


def _integer(v, key, low) -> int:
    x = _number(v, key)
    if not (math.isfinite(x) and x.is_integer() and x >= low):
        raise ConfigError(f"{key}: expected an integer >= {low}, got {v!r}")
    return int(x)


def _pos_int(v, key):
    return _integer(v, key, 1)


def _nonneg_int(v, key):
    return _integer(v, key, 0)


def _m_value(v, key):
    x = _number(v, key)
    if x == math.inf:
        return INFINITY
    return _integer(x, key, 1)


def _vector(v, key) -> tuple:
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError(f"{key}: expected a list of numbers, got {v!r}")
    out = tuple(_number(x, key) for x in v)
    if not all(math.isfinite(x) for x in out):
        raise ConfigError(f"{key}: coordinates must be finite")
    return out


def _number_list(parse):
    def inner(v, key):
        if isinstance(v, str):
            v = [s for s in v.split(",") if s.strip()]
        if not isinstance(v, (list, tuple)) or not v:
            raise ConfigError(f"{key}: expected a nonempty list")
        return [parse(x, key) for x in v]
    return inner


def _point_pairs(v, key) -> list:
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError(f"{key}: expected a list of [p, q] point pairs")
    out = []
    for item in v:
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise ConfigError(f"{key}: each entry must be a pair [p, q], got {item!r}")
        out.append((_vector(item[0], key), _vector(item[1], key)))
    return out


def _label_pairs(v, key) -> list:
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError(f"{key}: expected a list of [p, q] label pairs")
    out = []
    for item in v:
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise ConfigError(f"{key}: each entry must be a pair of labels, got {item!r}")
        out.append((str(item[0]), str(item[1])))
    return out


def _path(v, key) -> str:
    if not isinstance(v, str) or not v:
        raise ConfigError(f"{key}: expected a file path")
    if not Path(v).is_file():
        raise ConfigError(f"{key}: no such file {v!r}")
    return v


def _choice(*options):
    def inner(v, key):
        if v not in options:
            raise ConfigError(f"{key}: expected one of {list(options)}, got {v!r}")
        return v
    return inner


def _norm_name(v, key) -> str:
    if not isinstance(v, str):
        raise ConfigError(f"{key}: expected a norm name")
    try:
        NormFieldPlanar.parse(v)
    except (DomainError, ValueError) as e:
        raise ConfigError(f"{key}: {e}") from None
    return v


def _optional(parse):
    def inner(v, key):
        return None if v is None else parse(v, key)
    return inner


GRID_KEYS = {
    "model": (_choice(*MODELS, "custom"), "heisenberg"),
    "lo": (_optional(_vector), None),
    "hi": (_optional(_vector), None),
    "dim": (_pos_int, 2),
    "h": (_positive, 1 / 32),
    "radius": (_pos_int, 2),
    "g1_scale": (_optional(_positive), None),
    "sigma_table": (_optional(_path), None),
}

SCHEMAS = {
    "ccdist": {**GRID_KEYS, "m": (_m_value, INFINITY), "pairs": (_optional(_point_pairs), None)},
    "monotone": {
        **GRID_KEYS, "h": (_positive, 1 / 8),
        "pairs": (_optional(_point_pairs), None), "n_pairs": (_pos_int, 20),
        "m_values": (_number_list(_m_value), [1, 2, 4, 8, 16, 32, INFINITY]),
    },
    "embed": {
        "input": (_path, REQUIRED), "m": (_nonneg_int, 1), "N": (_optional(_pos_int), None),
        "schedule": (_optional(_number_list(_positive)), None), "steps": (_pos_int, 3),
    },
    "verify-tube": {
        "model": (_choice(*TUBE_MODELS), "circle"), "delta": (_positive, 0.05), "eta": (_positive, 0.1),
        "density": (_positive, 0.01), "pairs": (_pos_int, 100),
    },
    "pull": {
        "input": (_path, REQUIRED), "map": (_optional(_path), None), "epsilon": (_positive, REQUIRED),
        "pairs": (_optional(_label_pairs), None),
    },
    "defect": {
        "kind": (_choice("finsler", "path"), "finsler"), "norm": (_norm_name, "sup"), "k": (_pos_int, 2),
        "budget": (_pos_int, 10**6), "input": (_optional(_path), None), "map": (_optional(_path), None),
        "curves": (_pos_int, 100), "max_defect": (_optional(_number), None), "min_defect": (_optional(_number), None),
    },
    "collapse": {
        "t_values": (_number_list(_positive), [0.25, 0.0625]), "h": (_positive, 1 / 32), "radius": (_pos_int, 2),
    },
}

COMMANDS = tuple(SCHEMAS)

# flag -> key per command
OVERRIDES = {
    "m": {"ccdist": "m", "embed": "m"},
    "epsilon": {"embed": "schedule", "pull": "epsilon"},
    "resolution": {"ccdist": "h", "monotone": "h", "collapse": "h", "verify-tube": "density"},
    "eta": {"verify-tube": "eta"},
    "delta": {"verify-tube": "delta"},
    "norm": {"defect": "norm"},
}


@dataclass
class RunConfig:
    command: str
    params: dict
    seed: int = 0
    output: str | None = None

    def echo(self) -> dict:
        return {"command": self.command, "seed": self.seed, "output": self.output, **self.params}


@dataclass
class RunReport:
    command: str
    config: dict
    metrics: dict
    passed: bool
    duration: float
    seed: int
    outputs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "command": self.command, "config": self.config, "metrics": self.metrics, "pass": self.passed,
            "duration": self.duration, "seed": self.seed, "outputs": self.outputs,
        }


def _check_grid(p: dict, name: str) -> None:
    model = p["model"]
    if model == "custom":
        if p["sigma_table"] is None or p["lo"] is None or p["hi"] is None:
            raise ConfigError(f"{name}: model 'custom' needs sigma_table, lo and hi")
    elif p["sigma_table"] is not None:
        raise ConfigError(f"{name}: sigma_table requires model 'custom'")
    if (p["lo"] is None) != (p["hi"] is None):
        raise ConfigError(f"{name}: give both lo and hi, or neither")
    dim = {"heisenberg": 3, "grushin": 2}.get(model, p["dim"] if p["lo"] is None else len(p["lo"]))
    if p["lo"] is not None:
        if len(p["lo"]) != dim or len(p["hi"]) != dim:
            raise ConfigError(f"{name}: box bounds must have {dim} coordinates")
        if any(b <= a for a, b in zip(p["lo"], p["hi"])):
            raise ConfigError(f"{name}: need lo < hi in every coordinate")
    if p.get("pairs"):
        for a, b in p["pairs"]:
            if len(a) != dim or len(b) != dim:
                raise ConfigError(f"{name}: pair points must have {dim} coordinates")


def _check_preconditions(cmd: str, p: dict) -> None:
    if cmd in ("ccdist", "monotone"):
        _check_grid(p, cmd)
    if cmd == "verify-tube":
        if not 0 < p["eta"] < 1:
            raise ConfigError("eta: must lie in (0, 1)")
        if not p["delta"] < p["eta"]:
            raise ConfigError("delta: must be smaller than eta")
    if cmd == "embed" and p["schedule"] is not None:
        s = p["schedule"]
        if any(b >= a for a, b in zip(s, s[1:])):
            raise ConfigError("schedule: must be strictly decreasing")
    if cmd == "defect":
        if p["kind"] == "path" and (p["input"] is None or p["map"] is None):
            raise ConfigError("defect kind 'path' needs input and map files")
    if cmd == "collapse":
        t = p["t_values"]
        if any(b >= a for a, b in zip(t, t[1:])):
            raise ConfigError("t_values: must be strictly decreasing")


def parse_config(data: dict | None, command: str | None = None, overrides: dict | None = None,
                 seed=None, output=None) -> RunConfig:
    """Merge file contents, command-line overrides and defaults into a validated RunConfig."""
    data = dict(data or {})
    file_cmd = data.pop("command", None)
    if command and file_cmd and command != file_cmd:
        raise ConfigError(f"command: config says {file_cmd!r} but {command!r} was requested")
    cmd = command or file_cmd
    if cmd is None:
        raise ConfigError("command: no command given")
    if cmd not in SCHEMAS:
        raise ConfigError(f"command: unknown command {cmd!r}; expected one of {list(COMMANDS)}")
    file_seed = data.pop("seed", None)
    file_output = data.pop("output", None)
    schema = SCHEMAS[cmd]
    for key in data:
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for command {cmd}")
    for flag, value in (overrides or {}).items():
        if value is None:
            continue
        if cmd not in OVERRIDES[flag]:
            raise ConfigError(f"option --{flag} does not apply to command {cmd}")
        data[OVERRIDES[flag][cmd]] = value
    params = {}
    for key, (parse, default) in schema.items():
        if key in data:
            params[key] = parse(data[key], key)
        elif default is REQUIRED:
            raise ConfigError(f"{key}: required for command {cmd}")
        else:
            params[key] = default
    _check_preconditions(cmd, params)
    s = seed if seed is not None else file_seed
    s = 0 if s is None else _integer(s, "seed", 0)
    if s >= SEED_LIMIT:
        raise ConfigError("seed: must fit in 64 bits")
    out = output if output is not None else file_output
    if out is not None and not isinstance(out, str):
        raise ConfigError("output: expected a directory path")
    return RunConfig(cmd, params, s, out)


# --- commands ----------------------------------------------------------------

def _structure(p: dict) -> HorizontalStructure:
    if p["model"] == "custom":
        table = np.load(p["sigma_table"])
        grid = GridDomain.box(p["lo"], p["hi"], p["h"], p["radius"])
        return HorizontalStructure(grid, table=table)
    grid = default_grid(p["model"], p["h"], p["radius"], p["lo"], p["hi"], p["dim"])
    return model_catalog(p["model"], grid)


def _default_pairs(model: str, dim: int):
    if model == "heisenberg":
        return [((0.0, 0.0, 0.0), (0.0, 0.0, 1.0))]
    if model == "grushin":
        return [((-1.0, 0.0), (1.0, 0.0))]
    if model == "euclidean":
        return [((0.0,) * dim, (2.0,) + (0.0,) * (dim - 1))]
    raise ConfigError("pairs: required for a custom structure")


def _schedule(S, p):
    if p["g1_scale"] is not None:
        return ApproximantSchedule(p["g1_scale"])
    return ApproximantSchedule.for_structure(S)


def _fmt_m(m):
    return "infinity" if m == INFINITY else int(m)


def run_ccdist(cfg: RunConfig, files: dict):
    p = cfg.params
    S = _structure(p)
    solver = StencilSolver(S, _schedule(S, p).with_m(p["m"]))
    pairs = p["pairs"] or _default_pairs(p["model"], S.grid.ndim)
    rows = [(a, b, _fmt_m(p["m"]), solver.solve(a, b)[0]) for a, b in pairs]
    files["distances.csv"] = ("csv", "distances", ["p", "q", "m", "distance"], rows)
    metrics = {
        "model": S.name, "grid": {"shape": list(S.grid.shape), "h": list(S.grid.h)},
        "distances": [r[3] for r in rows],
    }
    return metrics, all(math.isfinite(r[3]) for r in rows)


def run_monotone(cfg: RunConfig, files: dict):
    p = cfg.params
    S = _structure(p)
    pairs = p["pairs"] or random_grid_pairs(S.grid, p["n_pairs"], cfg.seed)
    rep = monotone_convergence_report(S, pairs, p["m_values"], _schedule(S, p))
    rows = [(a, b, _fmt_m(m), d) for a, b, m, d in rep.rows()]
    files["distances.csv"] = ("csv", "distances", ["p", "q", "m", "distance"], rows)
    metrics = {
        "model": S.name, "grid": {"shape": list(S.grid.shape), "h": list(S.grid.h)},
        "m_values": [_fmt_m(m) for m in rep.m_values], "pairs": len(rep.pairs),
        "monotone": rep.monotone, "dominated": rep.dominated,
    }
    return metrics, rep.passed


def run_embed(cfg: RunConfig, files: dict):
    p = cfg.params
    X = io.read_distance_matrix(p["input"])
    schedule = p["schedule"] if p["schedule"] is not None else default_schedule(X, p["steps"])
    res = embed(X, p["m"], schedule, cfg.seed, p["N"])
    files["pointmap.txt"] = ("pointmap", res.map)
    metrics = res.report()
    metrics["schedule"] = schedule
    return metrics, res.delta_final == 0.0


def run_verify_tube(cfg: RunConfig, files: dict):
    p = cfg.params
    rep = tube_experiment(p["model"], p["delta"], p["eta"], p["density"], p["pairs"], cfg.seed)
    rows = [(a, b, ds, dt) for (a, b), ds, dt in zip(rep.pop("pairs"), rep.pop("d_surface"), rep.pop("d_tube"))]
    files["tube.csv"] = ("csv", "tube-pairs", ["p", "q", "d_surface", "d_tube"], rows)
    return rep, rep["pass"]


def run_pull(cfg: RunConfig, files: dict):
    p = cfg.params
    X = io.read_distance_matrix(p["input"])
    f = io.read_point_map(p["map"], X) if p["map"] else MetricImage.identity(X)
    labels = [str(x) for x in X.labels]
    if p["pairs"] is None:
        pairs = [(labels[i], labels[j]) for i in range(X.n) for j in range(i + 1, X.n)]
    else:
        pairs = p["pairs"]
        for a, b in pairs:
            for lab in (a, b):
                if lab not in labels:
                    raise ConfigError(f"pairs: unknown point label {lab!r}")
    P = pull_matrix(f, p["epsilon"])
    rows = []
    for a, b in pairs:
        i, j = labels.index(a), labels.index(b)
        if math.isinf(P[i, j]):
            raise UnreachableError(f"no {p['epsilon']}-chain joins {a!r} and {b!r}", (i, j))
        rows.append((a, b, p["epsilon"], float(P[i, j])))
    files["pull.csv"] = ("csv", "pull", ["p", "q", "epsilon", "pull"], rows)
    d = np.array([X.dist[labels.index(a), labels.index(b)] for a, b, _, _ in rows])
    v = np.array([r[3] for r in rows])
    metrics = {"pairs": len(rows), "max_pull_over_d": float(np.max(v / d)) if len(rows) else 0.0}
    return metrics, True


def run_defect(cfg: RunConfig, files: dict):
    p = cfg.params
    if p["kind"] == "finsler":
        value = linear_finsler_defect(NormFieldPlanar.parse(p["norm"]), p["k"], p["budget"])
        metrics = {"kind": "finsler", "norm": p["norm"], "k": p["k"], "defect": value}
    else:
        X = io.read_distance_matrix(p["input"])
        f = io.read_point_map(p["map"], X)
        curves = curve_family(X, p["curves"], cfg.seed)
        L = curve_length_pairs(f, curves)
        value = path_isometry_defect(f, X, curves)
        rows = [(i, a, b) for i, (a, b) in enumerate(L)]
        files["curves.csv"] = ("csv", "curve-lengths", ["curve", "length_source", "length_image"], rows)
        metrics = {"kind": "path", "curves": len(curves), "defect": value,
                   "length_nonincreasing": bool(np.all(L[:, 1] <= L[:, 0]))}
    ok = True
    if p["max_defect"] is not None:
        ok &= value <= p["max_defect"]
    if p["min_defect"] is not None:
        ok &= value >= p["min_defect"]
    return metrics, bool(ok)


def run_collapse(cfg: RunConfig, files: dict):
    p = cfg.params
    ratios = [central_collapse_ratio(t, p["h"], p["radius"]) for t in p["t_values"]]
    oracle = [math.sqrt(t) / (2 * math.sqrt(math.pi)) for t in p["t_values"]]
    files["collapse.csv"] = ("csv", "collapse", ["t", "ratio", "oracle"], list(zip(p["t_values"], ratios, oracle)))
    nonincreasing = all(b <= a for a, b in zip(ratios, ratios[1:]))
    metrics = {"t_values": p["t_values"], "ratios": ratios, "oracle": oracle, "nonincreasing": nonincreasing}
    return metrics, nonincreasing


RUNNERS = {
    "ccdist": run_ccdist, "monotone": run_monotone, "embed": run_embed, "verify-tube": run_verify_tube,
    "pull": run_pull, "defect": run_defect, "collapse": run_collapse,
}


def run(cfg: RunConfig) -> tuple[RunReport, dict]:
    """Execute a validated config; returns the report and the data files to write."""
    files: dict = {}
    t0 = time.perf_counter()
    metrics, ok = RUNNERS[cfg.command](cfg, files)
    duration = time.perf_counter() - t0
    report = RunReport(cfg.command, cfg.echo(), metrics, bool(ok), duration, cfg.seed, sorted(files))
    return report, files


def write_outputs(outdir: str, report: RunReport, files: dict) -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, spec in sorted(files.items()):
        if spec[0] == "csv":
            io.write_csv(out / name, spec[1], spec[2], spec[3])
        elif spec[0] == "pointmap":
            io.write_point_map(out / name, spec[1])
    io.write_json(out / "report.json", report.to_dict())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="metricgeom", description="Metric geometry experiments.")
    ap.add_argument("command", nargs="?", choices=COMMANDS, help="operation to run (may also come from --config)")
    ap.add_argument("--config", help="YAML file of parameters")
    ap.add_argument("--seed", help="64-bit seed governing all randomness")
    ap.add_argument("--output", help="directory for the report and data files")
    ap.add_argument("--m", help="approximation index (or 'infinity'), or embedding parameter m")
    ap.add_argument("--epsilon", help="chain scale for pull; comma-separated schedule for embed")
    ap.add_argument("--resolution", help="grid step h, or tube sampling density")
    ap.add_argument("--eta", help="tube loss parameter")
    ap.add_argument("--delta", help="tube radius")
    ap.add_argument("--norm", help="planar norm: euclidean, sup, ell1 or p=<x>")
    return ap


def _error(kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return 1


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        data = None
        if args.config:
            try:
                data = yaml.safe_load(Path(args.config).read_text())
            except yaml.YAMLError as e:
                raise ConfigError(f"malformed config: {' '.join(str(e).split())}") from None
            if data is not None and not isinstance(data, dict):
                raise ConfigError("config must be a mapping of keys to values")
        overrides = {k: getattr(args, k) for k in OVERRIDES}
        cfg = parse_config(data, args.command, overrides, args.seed, args.output)
        report, files = run(cfg)
        if cfg.output:
            write_outputs(cfg.output, report, files)
    except DomainError as e:
        return _error(type(e).__name__, str(e))
    except (OSError, RuntimeError, ValueError) as e:
        return _error(type(e).__name__, " ".join(str(e).split()))
    print(io.dumps_json(report.to_dict()))
    return 0 if report.passed else 2
