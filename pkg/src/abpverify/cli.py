"""``abp-verify`` command line: run scenario files, list checks, plot series."""

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .inequality import THEOREMS
from .scenarios import CATALOG, ConfigError, load_config, run_scenario

REPORT_SCHEMA = 1

DESCRIPTIONS = dict(THEOREMS, riccati_suite="Jacobi-field monotonicity, Riccati trace "
                    "comparison and Bishop-Gromov on a model manifold",
                    coverage_suite="contact-set coverage of the unit ball and Jacobian bounds")


def _clean(obj):
    """Make a result JSON-safe: tuples to lists, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _clean(obj.item())
    return obj


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else k, obj[k], out)
    elif isinstance(obj, (int, float, bool)) or obj is None:
        out.append((prefix, obj))


_TABLE_KEYS = {"lhs", "rhs", "ratio", "margin", "tolerance", "holds", "covered_fraction",
               "violation_fraction", "negative_margin_fraction", "boundary_contact_fraction",
               "min_margin", "psd_slack_p01"}


def table_rows(results):
    """Long-format rows ``scenario, check, level, metric, value``."""
    rows = []
    for entry in results:
        sc = entry["scenario"]
        body = entry["result"] or {}
        for lv in body.get("levels", []):
            for key, val in sorted(lv["report"].items()):
                if key in _TABLE_KEYS:
                    rows.append((sc["name"], sc["check"], lv["level"], key, val))
        flat = []
        for key in ("verdict", "battery", "bishop_gromov"):
            if key in body:
                _flatten(key, body[key], flat)
        for key in ("affine_error", "focal_error", "equality_margin", "richardson_band"):
            if key in body:
                flat.append((key, body[key]))
        rows += [(sc["name"], sc["check"], "", k, v) for k, v in flat]
        rows.append((sc["name"], sc["check"], "", "passed", entry["passed"]))
    return rows


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def run(config, out, jobs=1, seed=None):
    """Execute a config; write ``report.json``, ``tables.csv`` and SVGs to ``out``.

    Returns the report dictionary.  Wall-clock timing goes to the separate
    ``timing.json`` so the report itself is reproducible byte for byte.
    """
    from .plotting import plot_series

    cfg = load_config(config, seed)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if jobs > 1 and len(cfg.scenarios) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_scenario, cfg.scenarios))
    else:
        results = [run_scenario(sc) for sc in cfg.scenarios]
    elapsed = time.perf_counter() - t0
    results = [_clean(r) for r in results]
    report = {
        "schema": REPORT_SCHEMA,
        "version": __version__,
        "run": {"name": cfg.name, "seed": cfg.seed, "config": Path(cfg.source).name},
        "passed": all(r["passed"] for r in results),
        "summary": {"scenarios": len(results), "passed": sum(r["passed"] for r in results)},
        "scenarios": results,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    with open(out / "tables.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "check", "level", "metric", "value"])
        for row in table_rows(results):
            w.writerow([_fmt(v) for v in row])
    for entry in results:
        if entry.get("series"):
            name = entry["scenario"]["name"]
            plot_series(entry["series"], out / f"{name}.svg", title=name)
    (out / "timing.json").write_text(json.dumps(
        {"wall_clock_s": elapsed, "jobs": jobs}, indent=2) + "\n")
    return report


def list_checks(as_json=False, stream=None):
    stream = stream or sys.stdout
    catalog = {k: {"theorem": v["theorem"], "description": DESCRIPTIONS[k],
                   "required": list(v["required"]),
                   "optional": sorted(set(v["optional"]))} for k, v in CATALOG.items()}
    if as_json:
        stream.write(json.dumps(catalog, indent=2) + "\n")
        return catalog
    for k, v in catalog.items():
        stream.write(f"{k:26s} {v['description']} [{v['theorem']}]\n")
        stream.write(f"{'':26s} required: {', '.join(v['required'])}\n")
    return catalog


def plot(report_path, series, out=None):
    from .plotting import find_series, plot_series

    report = json.loads(Path(report_path).read_text())
    data = find_series(report, series)
    target = Path(out) if out else Path(report_path).with_name(f"{series}.svg")
    return plot_series(data, target, title=series)


def build_parser():
    p = argparse.ArgumentParser(prog="abp-verify",
                                description="Numerical checks of sharp geometric inequalities.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the scenarios of a config file")
    r.add_argument("--config", required=True, help="INI file or bundled config name")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--seed", type=int, default=None)
    lp = sub.add_parser("list", help="list available checks")
    lp.add_argument("--json", action="store_true")
    pp = sub.add_parser("plot", help="plot a series from a report")
    pp.add_argument("--report", required=True)
    pp.add_argument("--series", required=True)
    pp.add_argument("--out", default=None)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list":
            list_checks(args.json)
            return 0
        if args.command == "plot":
            path = plot(args.report, args.series, args.out)
            print(path)
            return 0
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        report = run(args.config, args.out, args.jobs, args.seed)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except KeyError as e:
        print(f"error: {e.args[0] if e.args else e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    for entry in report["scenarios"]:
        tag = "PASS" if entry["passed"] else "FAIL"
        msg = f"  ({entry['error']})" if entry["error"] else ""
        print(f"{tag} {entry['scenario']['name']} [{entry['scenario']['check']}]{msg}")
    s = report["summary"]
    print(f"{s['passed']}/{s['scenarios']} scenarios passed")
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
