"""Scenario configuration and execution for the command-line runner.

Config files are INI documents.  An optional ``[run]`` section sets
``seed`` and ``name``; every ``[scenario:<name>]`` section describes one
scenario::

    [scenario:disk-iso]
    check = isoperimetric
    shape = disk
    levels = 3, 4
    target = 1.0
    tolerance = 5e-3

Keys by check are listed in :data:`CATALOG`.  Geometry comes from
``shape`` (a built-in generator, with ``params = key=value, ...``) or
``mesh`` (a file path); ``embed`` pads the coordinates to a larger ambient
dimension.  Model checks use ``model``, ``n``, ``alpha`` and ``s``.

Densities use a tiny grammar: factors joined by ``*``, each one of a bare
number, ``constant(c)``, ``affine(c, a1, a2, ...)`` for ``c + a.x`` or
``gaussian(s)`` for ``exp(-s |x|^2)``.
"""

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import abp, comparison, inequality, neumann
from .mesh import builtin_shape, embed, load_mesh

CONFIG_DIR = Path(__file__).with_name("configs")

_MESH_KEYS = ("shape", "mesh", "params", "embed", "levels")
_MODEL_KEYS = ("model", "n", "alpha", "s")
_TARGET_KEYS = ("target", "tolerance", "min_ratio")

CATALOG = {
    "sobolev_euclidean": {
        "theorem": "sobolev_euclidean", "required": ("shape|mesh",),
        "optional": _MESH_KEYS + _TARGET_KEYS + ("density",),
    },
    "isoperimetric": {
        "theorem": "isoperimetric", "required": ("shape|mesh",),
        "optional": _MESH_KEYS + _TARGET_KEYS,
    },
    "fwc": {
        "theorem": "fwc", "required": ("shape|mesh",),
        "optional": _MESH_KEYS + _TARGET_KEYS,
    },
    "michael_simon": {
        "theorem": "michael_simon", "required": ("shape|mesh",),
        "optional": _MESH_KEYS + _TARGET_KEYS + ("density", "m"),
    },
    "log_sobolev": {
        "theorem": "log_sobolev", "required": ("shape|mesh",),
        "optional": _MESH_KEYS + _TARGET_KEYS + ("density", "min_margin"),
    },
    "riemannian_isoperimetric": {
        "theorem": "riemannian_isoperimetric", "required": ("model", "n", "outer"),
        "optional": _MODEL_KEYS + _TARGET_KEYS + ("inner",),
    },
    "riemannian_fwc": {
        "theorem": "riemannian_fwc", "required": ("model", "n", "radius"),
        "optional": _MODEL_KEYS + _TARGET_KEYS,
    },
    "heintze_karcher": {
        "theorem": "heintze_karcher", "required": ("model", "n", "rho0", "r"),
        "optional": _MODEL_KEYS + _TARGET_KEYS,
    },
    "riccati_suite": {
        "theorem": "riemannian_sobolev_monotonicity; riemannian_fwc_monotonicity",
        "required": ("n",),
        "optional": _MODEL_KEYS + ("count", "horizon", "bishop_gromov"),
    },
    "coverage_suite": {
        "theorem": "abp_surjectivity_and_jacobian",
        "required": ("shape|mesh", "mode"),
        "optional": _MESH_KEYS + ("mode", "density", "samples", "min_covered",
                                  "max_violation"),
    },
}


class ConfigError(ValueError):
    """Bad configuration; the message names the key and line."""

    def __init__(self, message, key=None, line=None):
        where = ""
        if key is not None:
            where = f"key {key!r}"
        if line is not None:
            where += f"{' at ' if where else ''}line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.key = key
        self.line = line


@dataclass
class Scenario:
    name: str
    check: str
    options: dict
    lines: dict = field(default_factory=dict)
    seed: int = 0

    def line(self, key):
        return self.lines.get(key)

    def error(self, key, message):
        return ConfigError(f"[scenario:{self.name}] {message}", key, self.line(key))

    def get(self, key, default=None):
        return self.options.get(key, default)

    def number(self, key, default=None, kind=float):
        raw = self.options.get(key)
        if raw is None:
            if default is None:
                raise self.error(key, "missing required value")
            return default
        try:
            return kind(raw)
        except ValueError:
            raise self.error(key, f"expected a number, got {raw!r}") from None

    @property
    def levels(self):
        raw = self.options.get("levels", "3")
        try:
            out = tuple(int(x) for x in raw.replace(",", " ").split())
        except ValueError:
            raise self.error("levels", f"expected integers, got {raw!r}") from None
        if not out or any(v < 0 for v in out):
            raise self.error("levels", "need at least one nonnegative level")
        return out

    def echo(self):
        return {"name": self.name, "check": self.check, "seed": self.seed,
                "options": dict(sorted(self.options.items()))}


@dataclass
class RunConfig:
    name: str
    seed: int
    scenarios: list
    source: str = ""


def _line_index(text):
    """Map ``(section, key)`` to the 1-based line on which it is set."""
    out = {}
    section = None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            out[(section, None)] = i
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            out[(section, m.group(1).strip().lower())] = i
    return out


def resolve_config(path):
    """Accept a file path or the name of a bundled config."""
    p = Path(path)
    if p.exists():
        return p
    for cand in (CONFIG_DIR / path, CONFIG_DIR / f"{path}.ini"):
        if cand.exists():
            return cand
    raise ConfigError(f"config {str(path)!r} not found (bundled: "
                      f"{', '.join(sorted(x.stem for x in CONFIG_DIR.glob('*.ini')))})")


def parse_config(text, source="<string>", seed=None):
    """Parse and validate config text into a :class:`RunConfig`."""
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        cp.read_string(text, source=source)
    except configparser.DuplicateOptionError as e:
        raise ConfigError(f"duplicate option in [{e.section}]", e.option, e.lineno) from None
    except configparser.DuplicateSectionError as e:
        raise ConfigError(f"duplicate section [{e.section}]", None, e.lineno) from None
    except configparser.ParsingError as e:
        line = e.errors[0][0] if getattr(e, "errors", None) else None
        raise ConfigError("unparsable line", None, line) from None
    except configparser.Error as e:
        raise ConfigError(str(e).splitlines()[0], None, getattr(e, "lineno", None)) from None
    lines = _line_index(text)
    run_name, base_seed = Path(source).stem, 0
    if cp.has_section("run"):
        sec = cp["run"]
        for key in sec:
            if key not in ("seed", "name"):
                raise ConfigError("unknown key in [run]", key, lines.get(("run", key)))
        run_name = sec.get("name", run_name)
        try:
            base_seed = int(sec.get("seed", "0"))
        except ValueError:
            raise ConfigError("seed must be an integer", "seed",
                              lines.get(("run", "seed"))) from None
    if seed is not None:
        base_seed = int(seed)
    scenarios = []
    for sect in cp.sections():
        if sect == "run":
            continue
        if not sect.startswith("scenario:"):
            raise ConfigError(f"unknown section [{sect}]", None, lines.get((sect, None)))
        name = sect.split(":", 1)[1].strip()
        opts = dict(cp[sect])
        sl = {k: lines.get((sect, k)) for k in opts}
        sl[None] = lines.get((sect, None))
        if "check" not in opts:
            raise ConfigError(f"[{sect}] has no check id", "check", sl[None])
        check = opts.pop("check").strip()
        if check not in CATALOG:
            raise ConfigError(f"unknown check id {check!r}; known: {', '.join(CATALOG)}",
                              "check", sl.get("check"))
        entry = CATALOG[check]
        allowed = set(entry["optional"]) | {"seed"}
        for req in entry["required"]:
            allowed |= set(req.split("|"))
        for key in opts:
            if key not in allowed:
                raise ConfigError(f"[{sect}] key not used by check {check!r}", key, sl.get(key))
        for req in entry["required"]:
            if not any(k in opts for k in req.split("|")):
                raise ConfigError(f"[{sect}] check {check!r} requires {req.replace('|', ' or ')}",
                                  req, sl[None])
        sc_seed = base_seed
        if "seed" in opts:
            try:
                sc_seed = int(opts.pop("seed"))
            except ValueError:
                raise ConfigError("seed must be an integer", "seed", sl.get("seed")) from None
        sc = Scenario(name, check, opts, sl, sc_seed)
        _ = sc.levels
        if "density" in opts:
            parse_density(opts["density"], sc)
        scenarios.append(sc)
    if not scenarios:
        raise ConfigError("config defines no [scenario:...] sections")
    return RunConfig(run_name, base_seed, scenarios, source)


def load_config(path, seed=None):
    p = resolve_config(path)
    return parse_config(p.read_text(), str(p), seed)


# -- densities and geometry -------------------------------------------------------

_FACTOR = re.compile(r"^\s*(?:(?P<num>[-+0-9.eE]+)|(?P<fn>constant|affine|gaussian)\s*\((?P<args>[^)]*)\))\s*$")


def parse_density(text, scenario=None):
    """Compile a density expression into a callable on point arrays."""
    factors = []
    for part in text.split("*"):
        m = _FACTOR.match(part)
        err = (scenario.error("density", f"cannot parse factor {part.strip()!r}")
               if scenario else ConfigError(f"cannot parse density factor {part.strip()!r}"))
        if not m:
            raise err
        try:
            if m.group("num"):
                factors.append(("constant", (float(m.group("num")),)))
                continue
            args = tuple(float(a) for a in m.group("args").split(",") if a.strip())
        except ValueError:
            raise err from None
        fn = m.group("fn")
        if (fn in ("constant", "gaussian") and len(args) != 1) or (fn == "affine" and not args):
            raise err
        factors.append((fn, args))

    def density(x):
        x = np.asarray(x, dtype=float)
        out = np.ones(len(x))
        for fn, args in factors:
            if fn == "constant":
                out = out * args[0]
            elif fn == "gaussian":
                out = out * np.exp(-args[0] * np.einsum("ij,ij->i", x, x))
            else:
                coef = np.zeros(x.shape[1])
                k = min(len(args) - 1, x.shape[1])
                coef[:k] = args[1:1 + k]
                out = out * (args[0] + x @ coef)
        return out

    return density


def _kv(text, scenario, key):
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in item:
            raise scenario.error(key, f"expected key=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        try:
            out[k] = int(v) if re.fullmatch(r"[-+]?\d+", v) else float(v)
        except ValueError:
            raise scenario.error(key, f"bad value {v!r} for {k}") from None
    return out


def build_geometry(scenario, level):
    if "mesh" in scenario.options:
        mesh = load_mesh(scenario.options["mesh"])
    else:
        params = _kv(scenario.get("params", ""), scenario, "params")
        try:
            mesh = builtin_shape(scenario.options["shape"], params, refinement=level)
        except TypeError as e:
            raise scenario.error("params", str(e)) from None
    if "embed" in scenario.options:
        mesh = embed(mesh, scenario.number("embed", kind=int))
    return mesh


def build_model_for(scenario):
    kind = scenario.get("model", "euclidean")
    return comparison.build_model(scenario.number("n", kind=int), kind,
                                  alpha=scenario.number("alpha", 1.0),
                                  s=scenario.number("s", 1.0))


# -- execution -----------------------------------------------------------------------


def _richardson_band(values):
    """Error estimate from the last two levels of an O(h^2) sequence."""
    if len(values) < 2 or values[-1] is None or values[-2] is None:
        return 0.0
    return abs(values[-1] - values[-2]) / 3.0


def _inequality_scenario(sc):
    check = sc.check
    levels = sc.levels if check in inequality.CHECKERS and not check.startswith(
        ("riemannian", "heintze")) else (0,)
    rows = []
    reports = []
    for level in levels:
        if check.startswith(("riemannian", "heintze")):
            model = build_model_for(sc)
            if check == "riemannian_isoperimetric":
                rep = inequality.check_riemannian_isoperimetric(
                    model, (sc.number("inner", 0.0), sc.number("outer")))
            elif check == "riemannian_fwc":
                rep = inequality.check_riemannian_fwc(model, sc.number("radius"))
            else:
                rep = inequality.check_heintze_karcher_tube(model, sc.number("rho0"),
                                                            sc.number("r"))
        else:
            geo = build_geometry(sc, level)
            fn = inequality.CHECKERS[check]
            if check in ("sobolev_euclidean", "log_sobolev"):
                rep = fn(geo, parse_density(sc.get("density", "1"), sc))
            elif check == "michael_simon":
                m = sc.number("m", kind=int) if "m" in sc.options else None
                rep = fn(geo, parse_density(sc.get("density", "1"), sc), m)
            else:
                rep = fn(geo)
        reports.append(rep)
        rows.append({"level": level, "h": rep.mesh_stats.get("h"), "report": rep.to_dict()})
    last = reports[-1]
    ratios = [r.ratio for r in reports]
    band = max(last.tolerance, _richardson_band(ratios))
    verdict = {"holds": all(r.holds for r in reports)}
    if "target" in sc.options:
        target = sc.number("target")
        tol = sc.number("tolerance", band)
        err = abs(last.ratio - target) if last.ratio is not None else math.inf
        verdict.update(target=target, target_tolerance=tol, target_error=err,
                       on_target=err <= tol)
    if "min_ratio" in sc.options:
        lo = sc.number("min_ratio")
        verdict["min_ratio"] = lo
        verdict["ratio_ok"] = all(r.ratio is not None and r.ratio > lo for r in reports)
    if check == "log_sobolev":
        floor = sc.number("min_margin", 0.0)
        verdict["margin_above"] = floor
        verdict["margin_ok"] = all(r.margin > floor for r in reports)
    passed = (verdict["holds"] and verdict.get("on_target", True)
              and verdict.get("margin_ok", True) and verdict.get("ratio_ok", True))
    series = None
    if len(reports) >= 2 and "target" in sc.options:
        series = {"kind": "convergence", "x_label": "h", "y_label": "|ratio - target|",
                  "x": [r["h"] for r in rows],
                  "y": [abs(r.ratio - sc.number("target")) for r in reports]}
    return passed, {"levels": rows, "richardson_band": band, "verdict": verdict}, series


def _riccati_scenario(sc):
    n = sc.number("n", kind=int)
    model = build_model_for(sc) if "model" in sc.options else None
    count = sc.number("count", 50, int)
    horizon = sc.number("horizon", 1.5)
    out = {}
    # closed forms
    c = 0.7
    tr = comparison.integrate_jacobi(np.zeros((n, n)), c * np.eye(n), 10.0)
    affine = float(np.abs(tr.P - (1 + c * tr.t)[:, None, None] * np.eye(n)).max())
    kap = 2.0
    trig = comparison.integrate_jacobi(kap * np.eye(n), np.zeros((n, n)), 2.0)
    focal_err = abs(trig.focal_time - math.pi / (2 * math.sqrt(kap)))
    a = 1.3
    eq = comparison.integrate_jacobi(np.zeros((n, n)), a ** (1 / (n - 1)) * np.eye(n), 1.0)
    eqv = comparison.sobolev_monotonicity_check(eq, a, n)
    battery = comparison.riccati_battery(n, count, sc.seed, horizon, model)
    out.update(affine_error=affine, focal_error=focal_err, focal_step=trig.dt,
               equality_margin=eqv.min_margin, equality_ok=eqv.ok, battery=battery.to_dict())
    passed = affine <= 1e-10 and focal_err <= trig.dt and eqv.ok and battery.ok
    if model is not None and sc.get("bishop_gromov", "yes").lower() in ("yes", "true", "1"):
        bg = comparison.bishop_gromov_check(model)
        out["bishop_gromov"] = {"monotone": bg.monotone, "max_increase": bg.max_increase,
                                "limit": bg.limit, "expected_limit": bg.expected_limit,
                                "limit_error": bg.limit_error, "ok": bg.ok}
        passed = passed and bg.ok
    idx = np.linspace(0, len(eq.t) - 1, 101).astype(int)
    series = {"kind": "trajectory", "x_label": "t", "y_label": "value",
              "x": [float(v) for v in eq.t[idx]],
              "curves": {"g(t)": [float(v) for v in eqv.values[idx]],
                         "det P": [float(v) for v in eq.det_p[idx]]}}
    return passed, out, series


def _coverage_scenario(sc):
    mode = sc.get("mode")
    if mode not in abp.MODES:
        raise sc.error("mode", f"unknown mode {mode!r}; known: {', '.join(abp.MODES)}")
    samples = sc.number("samples", 10_000, int)
    min_cov = sc.number("min_covered", 0.99)
    max_viol = sc.number("max_violation", 0.01)
    rows = []
    for level in sc.levels:
        geo = build_geometry(sc, level)
        if mode == "fwc":
            cf = abp.contact_field(geo, "fwc")
        else:
            f = inequality.density_values(geo, parse_density(sc.get("density", "1"), sc))
            sol = neumann.solve_density(geo, f, mode)
            cf = abp.contact_field(sol, mode)
        rep = abp.coverage_report(cf, samples, seed=sc.seed)
        d = rep.to_dict()
        rows.append({"level": level, "h": float(geo.h), "report": d})
    cov = [r["report"]["covered_fraction"] for r in rows]
    viol = [r["report"]["violation_fraction"] for r in rows]
    ok_levels = all(c >= min_cov for c in cov) and all(v <= max_viol for v in viol)
    improving = all(b >= a for a, b in zip(cov, cov[1:])) and \
        all(b <= a for a, b in zip(viol, viol[1:]))
    verdict = {"thresholds_met": ok_levels, "improving": improving}
    series = {"kind": "convergence", "x_label": "h", "y_label": "1 - covered_fraction",
              "x": [r["h"] for r in rows], "y": [1.0 - c for c in cov]} if len(rows) > 1 else None
    return ok_levels and improving, {"levels": rows, "verdict": verdict}, series


def run_scenario(sc):
    """Execute one scenario; failures are captured, never raised."""
    try:
        if sc.check == "riccati_suite":
            passed, body, series = _riccati_scenario(sc)
        elif sc.check == "coverage_suite":
            passed, body, series = _coverage_scenario(sc)
        else:
            passed, body, series = _inequality_scenario(sc)
        return {"scenario": sc.echo(), "passed": bool(passed), "error": None,
                "result": body, "series": series}
    except (ValueError, ArithmeticError, RuntimeError) as e:
        return {"scenario": sc.echo(), "passed": False,
                "error": f"{type(e).__name__}: {e}", "result": None, "series": None}


__all__ = [
    "CATALOG", "ConfigError", "RunConfig", "Scenario", "build_geometry", "build_model_for",
    "load_config", "parse_config", "parse_density", "resolve_config", "run_scenario",
]
