"""Command-line front end.

Every command resolves its inputs into a self-contained *job* document, runs
it, and writes ``<command>.csv`` plus ``manifest.json`` into ``--out``.  The
manifest embeds the job, so ``mmdscan replay manifest.json`` reproduces the
CSV byte for byte.

Exit codes: 0 ran, 2 input error, 3 resource budget exceeded, 4 internal
invariant failure.
"""
from __future__ import annotations

import argparse
import ast
import csv
import datetime as _dt
import hashlib
import io
import itertools
import json
import logging
import math
import operator
import os
import sys
from typing import Callable, Dict, List, Sequence

import numpy as np

from . import __version__, theory
from .errors import ConfigurationError, DomainError, InsufficientSamplesError, MMDScanError, ResourceError
from .geometry import Geometry, SizeBounds, candidate_to_dict
from .kernels import KernelSpec
from .mmd import SampleField, mmd2_gaussian_pair
from .scan import scan
from .sim import (
    RESULT_COLUMNS, ExperimentConfig, RiskGrid, result_row, with_detector,
)
from .theory import threshold_unknown

log = logging.getLogger("mmdscan")

EXIT_OK, EXIT_INPUT, EXIT_RESOURCE, EXIT_INTERNAL = 0, 2, 3, 4


class InputError(Exception):
    pass


# --- formatting ---------------------------------------------------------------

def fmt(v) -> str:
    """Shortest repr that round-trips floats exactly."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def write_csv(path: str, columns: Sequence[str], rows: List[dict], manifest_name: str = "manifest.json") -> None:
    buf = io.StringIO()
    buf.write(f"# manifest={manifest_name}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path: str) -> List[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def write_manifest(out: str, command: str, job: dict, outputs: Dict[str, str], started: str) -> str:
    path = os.path.join(out, "manifest.json")
    doc = {
        "command": command,
        "tool": "mmdscan",
        "version": __version__,
        "seed": job.get("config", {}).get("seed"),
        "job": job,
        "started": started,
        "finished": _now(),
        "outputs": {k: {"path": v, "sha256": _sha256(os.path.join(out, v))} for k, v in outputs.items()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# --- safe numeric parameters ---------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
           ast.Pow: operator.pow, ast.BitXor: operator.pow}
_FUNCS = {"exp": math.exp, "log": math.log, "sqrt": math.sqrt}
_NAMES = {"e": math.e, "pi": math.pi}


def eval_number(text: str) -> float:
    """Evaluate a small arithmetic expression such as ``exp(e)``, ``10**6`` or ``e^2``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
                and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise InputError(f"unsupported expression {text!r}")

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError:
        raise InputError(f"cannot parse number {text!r}") from None


# --- detect ---------------------------------------------------------------------

def read_samples(path: str) -> np.ndarray:
    """Parse a ``node,value`` CSV into values ordered by node index."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"{path}: cannot open: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}:1: empty file") from None
        if [h.strip().lower() for h in header] != ["node", "value"]:
            raise InputError(f"{path}:1: expected header 'node,value', got {','.join(header)!r}")
        seen: Dict[int, float] = {}
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InputError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                node = int(row[0])
            except ValueError:
                raise InputError(f"{path}:{lineno}: node index {row[0]!r} is not an integer") from None
            try:
                value = float(row[1])
            except ValueError:
                raise InputError(f"{path}:{lineno}: value {row[1]!r} is not a number") from None
            if not math.isfinite(value):
                raise InputError(f"{path}:{lineno}: value {row[1]!r} is not finite")
            if node < 0:
                raise InputError(f"{path}:{lineno}: negative node index {node}")
            if node in seen:
                raise InputError(f"{path}:{lineno}: node {node} listed twice")
            seen[node] = value
    N = len(seen)
    if N and sorted(seen) != list(range(N)):
        missing = sorted(set(range(max(seen) + 1)) - set(seen))[:5]
        raise InputError(f"{path}: node indices must be 0..{N - 1} without gaps (missing {missing})")
    return np.array([seen[i] for i in range(N)])


def run_detect(job: dict, out: str | None) -> dict:
    geom = Geometry.from_dict(job["geometry"])
    values = np.asarray(job["samples"], dtype=float)
    if values.size != geom.node_count:
        raise InputError(f"node count mismatch: sample file has {values.size} nodes, "
                         f"{geom.kind} geometry with n={geom.n} has {geom.node_count}")
    bounds = SizeBounds(int(job["min_size"]), int(job["max_size"]))
    kernel = KernelSpec.from_dict(job["kernel"])
    thr = job["threshold"]
    t = float(thr["value"]) if thr["rule"] == "fixed" else threshold_unknown(geom.node_count, float(thr["value"]))
    res = scan(SampleField(values, geom), geom, bounds, kernel, t, strict=not job.get("clip", False))
    if (res.decision == "H1") != (res.max_stat >= res.threshold):
        raise AssertionError("decision disagrees with the threshold rule")
    report = {**res.to_dict(), "geometry": geom.to_dict(), "min_size": bounds.min_size,
              "max_size": bounds.max_size, "kernel": kernel.to_dict()}
    if out:
        row = {"decision": res.decision, "max_stat": res.max_stat, "threshold": res.threshold,
               "n_candidates": res.n_candidates, "argmax": res.argmax.describe()}
        write_csv(os.path.join(out, "detect.csv"), list(row), [row])
    return report


# --- risk -----------------------------------------------------------------------

def _grid_axes(doc: dict, config: ExperimentConfig):
    grid = doc.get("grid") or {}
    mins = [int(v) for v in grid.get("min_sizes", [config.bounds.min_size])]
    maxs = [int(v) for v in grid.get("max_sizes", [config.bounds.max_size])]
    if not mins or not maxs:
        raise InputError("grid axes must be non-empty")
    return mins, maxs


def run_risk(job: dict, out: str | None) -> List[dict]:
    doc = job["config"]
    config = ExperimentConfig.from_dict(doc)
    mins, maxs = _grid_axes(doc, config)
    results = RiskGrid(config, mins, maxs).estimates()
    rows = [result_row(config, b, e) for b, e in results]
    for r in rows:
        if not 0.0 <= r["risk"] <= 2.0:
            raise AssertionError(f"risk estimate {r['risk']} outside [0, 2]")
    if out:
        write_csv(os.path.join(out, "risk.csv"), RESULT_COLUMNS, rows)
        if job.get("svg"):
            from .figures import risk_heatmap

            title = f"{config.geometry.kind} n={config.geometry.n}: minimax risk / 2"
            risk_heatmap([r["risk"] / 2 for r in rows], mins, maxs, os.path.join(out, job["svg"]), title)
    return rows


# --- compare --------------------------------------------------------------------

COMPARE_DETECTORS = ("ttest", "smirnov", "mmd")


def _compare_pairs(doc: dict, config: ExperimentConfig):
    if "pairs" in doc:
        return [(int(a), int(b)) for a, b in doc["pairs"]]
    mins, maxs = _grid_axes(doc, config)
    return list(itertools.product(mins, maxs))


def run_compare(job: dict, out: str | None) -> List[dict]:
    doc = job["config"]
    config = ExperimentConfig.from_dict(doc)
    pairs = _compare_pairs(doc, config)
    rows = [{"min_size": a, "max_size": b} for a, b in pairs]
    for det in COMPARE_DETECTORS:
        results = RiskGrid(with_detector(config, det), pairs=pairs).estimates()
        for row, (_, est) in zip(rows, results):
            row[det] = est.risk
            row[f"{det}_type1"] = est.type1
            row[f"{det}_type2"] = est.type2_worst
            row[f"{det}_hw"] = est.hw1 + est.hw2
    columns = ["min_size", "max_size", *COMPARE_DETECTORS,
               *(f"{d}_{s}" for d in COMPARE_DETECTORS for s in ("type1", "type2", "hw"))]
    if out:
        write_csv(os.path.join(out, "compare.csv"), columns, rows)
        if job.get("svg"):
            from .figures import compare_bars

            compare_bars(rows, COMPARE_DETECTORS, os.path.join(out, job["svg"]))
    return rows


# --- bounds ---------------------------------------------------------------------

def _overlap(n, k, geometry):
    return theory.overlap_distribution(n, k, geometry)


# op name -> (callable, [(column, kind, default)]); kind is "int", "float" or "str"
BOUND_OPS: Dict[str, tuple] = {
    "type1_line": (theory.type1_bound_line,
                   [("n", "int", None), ("t", "float", None), ("K", "float", 1.0),
                    ("I_min", "int", None), ("I_max", "int", None)]),
    "type1_ring": (theory.type1_bound_ring,
                   [("n", "int", None), ("t", "float", None), ("K", "float", 1.0),
                    ("I_min", "int", None), ("I_max", "int", None)]),
    "type1_disk": (theory.type1_bound_disk,
                   [("n", "int", None), ("t", "float", None), ("K", "float", 1.0),
                    ("D_min", "int", None), ("D_max", "int", None)]),
    "type1_rect": (theory.type1_bound_rect,
                   [("n", "int", None), ("r", "int", 2), ("t", "float", None), ("K", "float", 1.0),
                    ("S_min", "int", None), ("S_max", "int", None)]),
    "type2": (theory.type2_bound,
              [("n_total", "int", None), ("t", "float", None), ("K", "float", 1.0),
               ("mmd2", "float", None), ("size", "int", None)]),
    "sufficient_min_size": (theory.sufficient_min_size,
                            [("t", "float", None), ("K", "float", 1.0), ("eta", "float", 0.1),
                             ("n", "float", None), ("geometry", "str", "line"), ("r", "int", 1)]),
    "sufficient_max_size": (theory.sufficient_max_size,
                            [("t", "float", None), ("K", "float", 1.0), ("eta", "float", 0.1),
                             ("n", "float", None), ("geometry", "str", "line"), ("r", "int", 1),
                             ("k", "int", 2)]),
    "iterated_log": (theory.iterated_log, [("n", "float", None), ("k", "int", 1)]),
    "threshold_known": (theory.threshold_known, [("mmd2", "float", None), ("delta", "float", None)]),
    "threshold_unknown": (theory.threshold_unknown, [("n", "float", None), ("c", "float", 1.0)]),
    "overlap": (_overlap, [("n", "int", None), ("k", "int", None), ("geometry", "str", "line")]),
    "bayes_lower_bound": (theory.bayes_risk_lower_bound,
                          [("n", "int", None), ("k", "int", None), ("mu", "float", None),
                           ("geometry", "str", "line")]),
    "mmd2_gaussian": (mmd2_gaussian_pair,
                      [("mean_p", "float", 0.0), ("var_p", "float", 1.0), ("mean_q", "float", None),
                       ("var_q", "float", 1.0), ("sigma", "float", 1.0)]),
}


def _convert(kind: str, name: str, text):
    if kind == "str":
        return str(text)
    v = eval_number(text) if isinstance(text, str) else text
    if kind == "int":
        if float(v) != int(v):
            raise InputError(f"parameter {name} must be an integer, got {text!r}")
        return int(v)
    return float(v)


def bounds_job(op: str, params: Sequence[str]) -> dict:
    if op not in BOUND_OPS:
        raise InputError(f"unknown bounds operation {op!r}; choose from {', '.join(sorted(BOUND_OPS))}")
    _, spec = BOUND_OPS[op]
    names = [s[0] for s in spec]
    given: Dict[str, List[str]] = {}
    for p in params:
        if "=" not in p:
            raise InputError(f"parameter {p!r} is not of the form name=v1,v2,...")
        name, vals = p.split("=", 1)
        if name not in names:
            raise InputError(f"{op} takes parameters {', '.join(names)}; got {name!r}")
        given[name] = [v for v in vals.split(",") if v.strip()]
    grid = {}
    for name, kind, default in spec:
        if name in given:
            grid[name] = given[name]
        elif default is not None:
            grid[name] = [default if kind == "str" else repr(default)]
        else:
            raise InputError(f"{op} needs parameter {name}")
    return {"op": op, "params": grid}


def run_bounds(job: dict, out: str | None) -> List[dict]:
    op = job["op"]
    fn, spec = BOUND_OPS[op]
    names = [s[0] for s in spec]
    columns = names + (["Z"] if op == "overlap" else []) + ["value", "error"]
    rows = []
    for combo in itertools.product(*(job["params"][n] for n in names)):
        row = dict(zip(names, combo))
        try:
            args = [_convert(kind, name, v) for (name, kind, _), v in zip(spec, combo)]
            value = fn(*args)
        except (DomainError, ConfigurationError, InputError, ValueError, OverflowError) as exc:
            rows.append({**row, "value": None, "error": str(exc)})
            continue
        if op == "overlap":
            for z, pz in enumerate(value):
                rows.append({**row, "Z": z, "value": float(pz), "error": ""})
        else:
            rows.append({**row, "value": float(value), "error": ""})
    if out:
        write_csv(os.path.join(out, "bounds.csv"), columns, rows)
    return rows


# --- driver ---------------------------------------------------------------------

RUNNERS: Dict[str, Callable] = {"detect": run_detect, "risk": run_risk, "bounds": run_bounds,
                                "compare": run_compare}
OUTPUTS = {"detect": "detect.csv", "risk": "risk.csv", "bounds": "bounds.csv", "compare": "compare.csv"}


def execute(command: str, job: dict, out: str | None) -> object:
    started = _now()
    if out:
        os.makedirs(out, exist_ok=True)
    result = RUNNERS[command](job, out)
    if out:
        outputs = {"csv": OUTPUTS[command]}
        if job.get("svg"):
            outputs["figure"] = job["svg"]
        if command == "detect" and job.get("report"):
            outputs["report"] = job["report"]
            with open(os.path.join(out, job["report"]), "w") as fh:
                json.dump(result, fh, indent=2, sort_keys=True)
                fh.write("\n")
        write_manifest(out, command, job, outputs, started)
    return result


def _config_job(args) -> dict:
    from .sim import load_config

    config, doc = load_config(args.config)
    doc = dict(doc)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.trials is not None:
        doc["trials"] = args.trials
    config = ExperimentConfig.from_dict(doc)  # validate overrides
    resolved = {**doc, **config.to_dict()}
    job = {"config": resolved}
    if args.svg:
        job["svg"] = os.path.basename(args.svg)
    return job


def _add_common(p, config_overrides=False, svg=False):
    p.add_argument("--out", help="directory for CSV, figures and manifest.json")
    if config_overrides:
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--trials", type=int, help="override the config trial count")
    if svg:
        p.add_argument("--svg", help="file name (inside --out) for the rendered figure, e.g. heatmap.svg")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mmdscan", description="Kernel MMD scan statistics for anomalous structures.")
    ap.add_argument("--version", action="version", version=f"mmdscan {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="scan one sample file for an anomalous structure")
    d.add_argument("samples", help="CSV with header node,value")
    d.add_argument("--geometry", choices=["line", "ring", "lattice2d", "lattice"], default="line")
    d.add_argument("--n", type=int, required=True, help="network size parameter")
    d.add_argument("--r", type=int, default=2, help="lattice dimension (lattice only)")
    d.add_argument("--min-size", type=int, required=True)
    d.add_argument("--max-size", type=int, required=True)
    d.add_argument("--kernel", choices=["gaussian", "laplacian", "constant"], default="gaussian")
    d.add_argument("--bandwidth", type=float, default=1.0)
    g = d.add_mutually_exclusive_group(required=True)
    g.add_argument("--threshold", type=float, help="fixed threshold t")
    g.add_argument("--vanishing", type=float, metavar="C", help="threshold C / log(log N)")
    d.add_argument("--clip-bounds", action="store_true",
                   help="drop sizes leaving fewer than 2 nodes on a side instead of failing")
    d.add_argument("--report", help="JSON report file name (written inside --out, or at this path without --out)")
    _add_common(d)

    r = sub.add_parser("risk", help="Monte-Carlo minimax risk over a (min_size, max_size) grid")
    r.add_argument("config", help="JSON experiment config")
    _add_common(r, config_overrides=True, svg=True)

    c = sub.add_parser("compare", help="MMD vs t-test vs Smirnov scans on a shared config")
    c.add_argument("config", help="JSON experiment config")
    _add_common(c, config_overrides=True, svg=True)

    b = sub.add_parser("bounds", help="tabulate a theoretical bound over a parameter grid")
    b.add_argument("op", choices=sorted(BOUND_OPS))
    b.add_argument("--param", action="append", default=[], metavar="NAME=V1,V2",
                   help="parameter values (repeatable); expressions like exp(e) or 10**6 allowed")
    _add_common(b)

    rp = sub.add_parser("replay", help="re-run the job recorded in a manifest")
    rp.add_argument("manifest")
    rp.add_argument("--out", required=True)
    return ap


def _print_detect(report: dict) -> None:
    print(f"decision: {report['decision']}")
    print(f"max_stat: {report['max_stat']!r}")
    print(f"threshold: {report['threshold']!r}")
    print(f"candidates: {report['n_candidates']}")
    a = report["argmax"]
    print("argmax: " + " ".join(f"{k}={v}" for k, v in a.items()))


def _print_rows(rows: List[dict], columns: Sequence[str]) -> None:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])


def _dispatch(args) -> int:
    if args.command == "replay":
        try:
            with open(args.manifest) as fh:
                man = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"{args.manifest}: cannot read manifest: {exc}") from None
        execute(man["command"], man["job"], args.out)
        print(os.path.join(args.out, OUTPUTS[man["command"]]))
        return EXIT_OK

    if args.command == "detect":
        job = {
            "samples": read_samples(args.samples).tolist(),
            "sample_file": os.path.abspath(args.samples),
            "geometry": Geometry(args.geometry, args.n, args.r if args.geometry == "lattice" else
                                 (2 if args.geometry == "lattice2d" else 1)).to_dict(),
            "min_size": args.min_size,
            "max_size": args.max_size,
            "kernel": KernelSpec(args.kernel, args.bandwidth).to_dict(),
            "threshold": ({"rule": "fixed", "value": args.threshold} if args.threshold is not None
                          else {"rule": "vanishing", "value": args.vanishing}),
            "clip": bool(args.clip_bounds),
        }
        if args.report:
            job["report"] = os.path.basename(args.report) if args.out else None
        report = execute("detect", job, args.out)
        if args.report and not args.out:
            with open(args.report, "w") as fh:
                json.dump(report, fh, indent=2, sort_keys=True)
                fh.write("\n")
        _print_detect(report)
        return EXIT_OK

    if args.command == "bounds":
        job = bounds_job(args.op, args.param)
        rows = execute("bounds", job, args.out)
        _, spec = BOUND_OPS[args.op]
        cols = [s[0] for s in spec] + (["Z"] if args.op == "overlap" else []) + ["value", "error"]
        _print_rows(rows, cols)
        return EXIT_OK

    job = _config_job(args)
    rows = execute(args.command, job, args.out)
    cols = RESULT_COLUMNS if args.command == "risk" else ["min_size", "max_size", *COMPARE_DETECTORS]
    _print_rows(rows, cols)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except (InputError, ConfigurationError, InsufficientSamplesError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (AssertionError, MMDScanError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
