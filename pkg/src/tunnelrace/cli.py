"""Command line front end: ``tunnelrace {scatter,race,check-hardy,sweep}``.

Configs are JSON.  Every artifact is written with :mod:`tunnelrace.io`, so a
given config and seed always produce the same bytes.

Exit status: 0 all PASS, 1 a verdict FAILed, 2 usage or config error,
3 numerical-health failure.  Errors are reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .dynamics import NumericalHealthError
from .grids import GridError, build_grid
from .io import OutputError, json_text, write_csv, write_json
from .observables import (DetectorError, KernelColumn, LocalizationDetectorSpec, Smearing,
                          TimeDetectorSpec)
from .opcheck import ModelError, Symbol, build_model, covariant_inequality_check, hardy_check
from .potentials import PotentialError, PotentialSpec, potential_from_dict
from .race import (APPROACHES, DEFAULT_THETA, GENERATOR, GaussianRecipe, RaceConfigError, RaceError,
                   analyze_report, make_config, random_config, run_race, standard_time_detectors)
from .scattering import ScatteringError, halfplane_bound_check, transmission_curve

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_HEALTH = 0, 1, 2, 3
U64_MAX = 2**64 - 1


class ConfigError(ValueError):
    """Schema or precondition problems, one message per offending field."""

    def __init__(self, errors):
        self.errors = list(errors) if not isinstance(errors, str) else [errors]
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    potential: Optional[PotentialSpec] = None
    state: Optional[GaussianRecipe] = None
    approach: str = "I"
    detector: Any = None
    grid: Optional[dict] = None
    schedule: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    scatter: dict = field(default_factory=dict)
    hardy: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    out: Optional[str] = None
    raw: dict = field(default_factory=dict)


# -- parsing -------------------------------------------------------------------

def _num(d, key, path, errors, default=None, kind=float):
    if key not in d:
        if default is None:
            errors.append(f"{path}.{key}: missing")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and not float(v).is_integer()):
        errors.append(f"{path}.{key}: expected {'integer' if kind is int else 'number'}, got {type(v).__name__}")
        return default
    return kind(v)


def _seed(v, path="seed") -> int:
    if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v <= U64_MAX:
        raise ConfigError(f"{path}: expected an unsigned 64-bit integer, got {v!r}")
    return int(v)


def _smearing(d, path, errors):
    if not isinstance(d, dict):
        errors.append(f"{path}: expected object")
        return None
    try:
        return Smearing(str(d.get("family", "point")), float(d.get("width", 0.0)))
    except (DetectorError, TypeError, ValueError) as exc:
        errors.append(f"{path}: {exc}")


def _columns(items, path, errors):
    cols = []
    if not isinstance(items, list) or not items:
        errors.append(f"{path}: expected a nonempty list of kernel columns")
        return cols
    for i, c in enumerate(items):
        try:
            v = c.get("value", 1.0)
            v = complex(v[0], v[1]) if isinstance(v, list) else complex(v)
            cols.append(KernelColumn(c["family"], v, float(c.get("scale", 1.0)), float(c.get("delay", 0.0))))
        except KeyError as exc:
            errors.append(f"{path}[{i}].{exc.args[0]}: missing")
        except (DetectorError, TypeError, ValueError, AttributeError) as exc:
            errors.append(f"{path}[{i}]: {exc}")
    return cols


def parse_detector(d, approach, errors, path="detector"):
    if d is None:
        return None
    if not isinstance(d, dict) or "kind" not in d:
        errors.append(f"{path}.kind: missing")
        return None
    kind = d["kind"]
    try:
        if kind in ("canonical", "smeared", "kernel") and approach == "I":
            a = _num(d, "a", path, errors)
            if a is None:
                return None
            sm = _smearing(d.get("smearing", {}), f"{path}.smearing", errors) if kind == "smeared" else Smearing()
            cols = tuple(_columns(d.get("columns"), f"{path}.columns", errors)) if kind == "kernel" else ()
            if sm is None:
                return None
            return TimeDetectorSpec(kind, a, sm, cols)
        if kind in ("sharp", "smeared") and approach in ("II", "III"):
            mu = _smearing(d.get("mu", {}), f"{path}.mu", errors) if kind == "smeared" else Smearing()
            return None if mu is None else LocalizationDetectorSpec(kind, mu)
    except DetectorError as exc:
        errors.append(f"{path}: {exc}")
        return None
    errors.append(f"{path}.kind: {kind!r} is not a detector for approach {approach}")
    return None


def _tgrid(v, errors):
    if v is None:
        return None
    if isinstance(v, dict):
        start = _num(v, "start", "schedule.tgrid", errors)
        stop = _num(v, "stop", "schedule.tgrid", errors)
        num = _num(v, "num", "schedule.tgrid", errors, kind=int)
        if None in (start, stop, num):
            return None
        return np.linspace(start, stop, num)
    if isinstance(v, list):
        return np.asarray(v, dtype=float)
    errors.append("schedule.tgrid: expected a list or {start, stop, num}")


def config_from_dict(raw: dict, approach: Optional[str] = None, needs=("potential",)) -> RunConfig:
    """Validate a config object.  ``needs`` names the sections the command requires."""
    errors = []
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    for name in needs:
        if name not in raw:
            errors.append(f"{name}: missing")
    cfg = RunConfig(raw=raw)
    cfg.approach = approach or raw.get("approach", "I")
    if cfg.approach not in APPROACHES:
        errors.append(f"approach: expected one of {list(APPROACHES)}, got {cfg.approach!r}")
    if "potential" in raw:
        try:
            cfg.potential = potential_from_dict(raw["potential"]) if isinstance(raw["potential"], dict) else None
            if cfg.potential is None:
                errors.append("potential: expected object")
        except (PotentialError, TypeError, ValueError) as exc:
            msg = str(exc)
            errors.append(msg if msg.startswith("potential") else f"potential: {msg}")
    if "state" in raw:
        st = raw["state"]
        if not isinstance(st, dict):
            errors.append("state: expected object")
        else:
            k0 = _num(st, "k0", "state", errors)
            dk = _num(st, "dk", "state", errors)
            x_c = st.get("x_c")
            if x_c is not None and (isinstance(x_c, bool) or not isinstance(x_c, (int, float))):
                errors.append("state.x_c: expected number or null")
                x_c = None
            ramp = _num(st, "ramp", "state", errors, default=2.0)
            if k0 is not None and dk is not None:
                try:
                    cfg.state = GaussianRecipe(k0, dk, x_c, ramp)
                except RaceConfigError as exc:
                    errors.append(str(exc))
    if cfg.approach in APPROACHES:
        cfg.detector = parse_detector(raw.get("detector"), cfg.approach, errors)
    if "grid" in raw:
        g = raw["grid"]
        if not isinstance(g, dict):
            errors.append("grid: expected object")
        else:
            cfg.grid = {"n": _num(g, "n", "grid", errors, default=0, kind=int) or None}
            if "x_min" in g or "x_max" in g:
                cfg.grid["x_min"] = _num(g, "x_min", "grid", errors)
                cfg.grid["x_max"] = _num(g, "x_max", "grid", errors)
    sch = raw.get("schedule", {})
    if not isinstance(sch, dict):
        errors.append("schedule: expected object")
        sch = {}
    cfg.schedule = {"tgrid": _tgrid(sch.get("tgrid"), errors)}
    for key in ("times", "agrid"):
        v = sch.get(key)
        if v is not None and (not isinstance(v, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)):
            errors.append(f"schedule.{key}: expected a list of numbers")
            v = None
        cfg.schedule[key] = v
    if cfg.approach == "III" and cfg.schedule.get("times") is not None:
        bad = [t for t in cfg.schedule["times"] if not t > 0]
        if bad:
            errors.append(f"schedule.times: approach III needs t > 0, got {bad}")
    tol = raw.get("tolerances", {})
    if not isinstance(tol, dict):
        errors.append("tolerances: expected object")
        tol = {}
    for key in ("theta", "eps_disc", "phase"):
        if key in tol:
            v = _num(tol, key, "tolerances", errors)
            if v is not None and not v > (0 if key != "theta" else -1e-300):
                errors.append(f"tolerances.{key}: must be positive")
            elif v is not None:
                cfg.tolerances[key] = v
    if "cross_check" in tol:
        cfg.tolerances["cross_check"] = bool(tol["cross_check"])
    if "seed" in raw:
        try:
            cfg.seed = _seed(raw["seed"])
        except ConfigError as exc:
            errors += exc.errors
    for key in ("scatter", "hardy", "sweep"):
        v = raw.get(key, {})
        if not isinstance(v, dict):
            errors.append(f"{key}: expected object")
        else:
            setattr(cfg, key, v)
    if errors:
        raise ConfigError(errors)
    return cfg


def parse_config(path, approach: Optional[str] = None, needs=("potential",)) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config: {path} is not a readable file")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    return config_from_dict(raw, approach, needs)


def race_config(cfg: RunConfig):
    """Turn a parsed config into a :class:`RaceConfig`; precondition failures are config errors."""
    if cfg.state is None:
        raise ConfigError("state: missing")
    grid = None
    n = None
    if cfg.grid:
        n = cfg.grid.get("n")
        if "x_min" in cfg.grid:
            if n is None:
                raise ConfigError("grid.n: missing (needed with explicit x_min/x_max)")
            grid = build_grid(cfg.grid["x_min"], cfg.grid["x_max"], n)
    kw = {k: cfg.tolerances[k] for k in ("eps_disc", "phase", "cross_check") if k in cfg.tolerances}
    return make_config(cfg.approach, cfg.potential, cfg.state, cfg.detector, n=n, grid=grid,
                       tgrid=cfg.schedule.get("tgrid"), times=cfg.schedule.get("times"),
                       agrid=cfg.schedule.get("agrid"), theta=cfg.tolerances.get("theta"),
                       seed=cfg.seed, **kw)


# -- commands -------------------------------------------------------------------

def _out_dir(out) -> Path:
    d = Path(out or ".")
    if d.exists() and not d.is_dir():
        raise OutputError(f"--out {d} is not a directory")
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_scatter(cfg: RunConfig, out: Path) -> int:
    sc = cfg.scatter
    k_min = float(sc.get("k_min", 0.0))
    k_max = float(sc.get("k_max", 5.0))
    num = int(sc.get("num", 2048))
    if not (k_max > k_min >= 0 and num >= 2):
        raise ConfigError("scatter: need 0 <= k_min < k_max and num >= 2")
    k = np.linspace(k_min, k_max, num + 1)[1:] if k_min == 0 else np.linspace(k_min, k_max, num)
    curve = transmission_curve(cfg.potential, k)
    neg = np.abs(curve.multiplier(-curve.k) - np.conj(curve.T))
    hp = halfplane_bound_check(cfg.potential, samples=int(sc.get("halfplane_samples", 10_000)))
    tol = float(sc.get("tol", 1e-10))
    unit = float(np.max(curve.unitarity_defects()))
    report = {
        "potential": cfg.potential.to_dict(),
        "k": {"start": float(k[0]), "stop": float(k[-1]), "num": int(len(k))},
        "unitarity_defect": unit,
        "reciprocity_defect": curve.reciprocity_defect,
        "conjugation_defect": float(np.max(neg)),
        "continuity_violations": int(len(curve.continuity_violations())),
        "halfplane": {"max_abs_T": hp.max_value, "violations": hp.violations, "samples": hp.samples},
        "tolerance": tol,
    }
    ok = unit <= tol and curve.reciprocity_defect <= tol and hp.violations == 0
    report["verdict"] = "PASS" if ok else "FAIL"
    curve.to_csv(out / "scattering.csv")
    write_json(out / "scattering_report.json", report)
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_race(cfg: RunConfig, out: Path) -> int:
    rc = race_config(cfg)
    rep = run_race(rc)
    d = rep.to_dict()
    if rc.approach == "I":
        try:
            d["hartman"] = analyze_report(rep).to_dict()
        except RaceError as exc:
            d["hartman"] = {"error": str(exc)}
    write_csv(out / "race_curves.csv", rep.columns, rep.rows())
    write_json(out / "race_report.json", d)
    return EXIT_PASS if rep.passed else EXIT_FAIL


def _symbol(d: dict, cfg: RunConfig) -> Symbol:
    kind = d.get("kind", "transmission")
    if kind == "transmission":
        p = potential_from_dict(d["potential"]) if "potential" in d else cfg.potential
        if p is None:
            raise ConfigError("hardy.symbol.potential: missing (and no top-level potential)")
        return Symbol.transmission(p, float(d.get("scale", 1.0)))
    if kind == "shift":
        if "a" not in d:
            raise ConfigError("hardy.symbol.a: missing")
        return Symbol.shift(int(d["a"]))
    if kind == "constant":
        return Symbol("constant", value=complex(d.get("value", 1.0)))
    raise ConfigError(f"hardy.symbol.kind: unknown {kind!r}")


def cmd_check_hardy(cfg: RunConfig, out: Path) -> int:
    h = cfg.hardy
    sym = _symbol(h.get("symbol", {}), cfg)
    dims = h.get("dims", [256, 512, 1024])
    if not isinstance(dims, list) or not dims:
        raise ConfigError("hardy.dims: expected a nonempty list")
    tol = float(h.get("tol", 1e-8))
    errors = []
    cols = _columns(h["detector"], "hardy.detector", errors) if "detector" in h else None
    if errors:
        raise ConfigError(errors)
    shifts = [int(a) for a in h.get("shifts", [])]
    results = []
    for dim in dims:
        if cols or shifts:
            r = covariant_inequality_check(build_model(int(dim), sym, cols), shifts, tol)
        else:
            r = hardy_check(int(dim), sym, tol)
        results.append(r.to_dict())
    ok = all(r["verdict"] == "PASS" for r in results)
    report = {"symbol": sym.to_dict(), "hardy_by_construction": sym.hardy, "results": results,
              "tolerance": tol, "verdict": "PASS" if ok else "FAIL"}
    write_json(out / "hardy_report.json", report)
    return EXIT_PASS if ok else EXIT_FAIL


def run_sweep_case(args) -> dict:
    """One seeded case; returns a plain dict so it crosses process boundaries."""
    seed, case, approach, opts = args
    out = {"case": case, "runs": []}
    try:
        # approach I runs the four standard detectors; II draws its own smearing
        dets = standard_time_detectors(0.0) if approach == "I" else [None]
        for det in dets:
            rc = random_config(seed, case, approach, det, n=opts.get("n"), **opts.get("kw", {}))
            rep = run_race(rc)
            out["runs"].append({"verdict": rep.verdict, "max_violation": rep.max_violation,
                                "theta": rc.theta, "detector": rc.detector.to_dict(),
                                "config_sha256": rc.digest(), "report": rep.to_dict()})
        out["potential"] = rc.potential.to_dict()
        out["state"] = rc.state.to_dict()
        out["verdict"] = "PASS" if all(r["verdict"] == "PASS" for r in out["runs"]) else "FAIL"
    except NumericalHealthError as exc:
        out.update(verdict="ERROR", exit=EXIT_HEALTH, error={"type": type(exc).__name__, "message": str(exc)})
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        out.update(verdict="ERROR", exit=EXIT_CONFIG, error={"type": type(exc).__name__, "message": str(exc)})
    return out


def cmd_sweep(cfg: RunConfig, out: Path, cases: int, seed: int, workers: int) -> int:
    approach = cfg.approach
    sw = cfg.sweep
    opts = {"n": sw.get("n"), "kw": {}}
    for key in ("eps_disc", "phase", "cross_check"):
        if key in cfg.tolerances:
            opts["kw"][key] = cfg.tolerances[key]
    jobs = [(seed, i, approach, opts) for i in range(cases)]
    if workers > 1 and cases > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run_sweep_case, jobs))
    else:
        results = [run_sweep_case(j) for j in jobs]
    case_dir = out / "cases"
    summary = []
    for r in results:
        if r["verdict"] != "PASS":
            case_dir.mkdir(exist_ok=True)
            write_json(case_dir / f"case_{r['case']:04d}.json", r)
        runs = r.get("runs", [])
        summary.append({
            "case": r["case"], "verdict": r["verdict"],
            "max_violation": max((x["max_violation"] for x in runs), default=None),
            "theta": runs[0]["theta"] if runs else DEFAULT_THETA[approach],
            "runs": [{k: x[k] for k in ("verdict", "max_violation", "detector", "config_sha256")} for x in runs],
            "potential": r.get("potential"), "state": r.get("state"), "error": r.get("error"),
        })
    passed = all(s["verdict"] == "PASS" for s in summary)
    viol = [s["max_violation"] for s in summary if s["max_violation"] is not None]
    agg = {"approach": approach, "cases": cases, "seed": seed, "generator": GENERATOR,
           "n_pass": sum(s["verdict"] == "PASS" for s in summary),
           "n_fail": sum(s["verdict"] == "FAIL" for s in summary),
           "n_error": sum(s["verdict"] == "ERROR" for s in summary),
           "worst_violation": max(viol) if viol else None,
           "verdict": "PASS" if passed else "FAIL", "results": summary,
           "version": __version__}
    write_json(out / "sweep.json", agg)  # aggregate last
    if passed:
        return EXIT_PASS
    codes = [r.get("exit") for r in results if r["verdict"] == "ERROR"]
    if EXIT_HEALTH in codes:
        return EXIT_HEALTH
    return EXIT_FAIL if agg["n_fail"] else EXIT_CONFIG


# -- entry point ----------------------------------------------------------------

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage problems surface as JSON on stderr like every other error
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tunnelrace", description="Tunneled versus free particle races.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, hlp in (("scatter", "transmission curve and S-matrix checks"),
                      ("race", "one tunneled-versus-free race"),
                      ("check-hardy", "finite-dimensional operator inequality check"),
                      ("sweep", "seeded randomized races with an aggregate verdict")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", metavar="PATH", required=name in ("scatter", "race"))
        p.add_argument("--out", metavar="DIR", default=".")
        p.add_argument("--approach", choices=APPROACHES)
        if name == "sweep":
            p.add_argument("--cases", type=int, default=25, metavar="N")
            p.add_argument("--seed", type=int, default=None, metavar="U64")
            p.add_argument("--workers", type=int, default=1, metavar="N")
    return ap


def _error(kind: str, exc: BaseException, code: int) -> int:
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc), "exit": code}
    if isinstance(exc, ConfigError):
        payload["fields"] = exc.errors
    sys.stderr.write(json_text(payload))
    return code


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except UsageError as exc:
        return _error("usage", exc, EXIT_CONFIG)
    except SystemExit as exc:
        # --help and --version
        return int(exc.code or 0)
    try:
        if args.command == "sweep":
            if args.cases < 1 or args.workers < 1:
                raise ConfigError("--cases and --workers must be positive")
            needs = ()
        elif args.command == "check-hardy":
            needs = ()
        else:
            needs = ("potential", "state") if args.command == "race" else ("potential",)
        if args.config:
            cfg = parse_config(args.config, args.approach, needs)
        else:
            cfg = config_from_dict({}, args.approach, needs)
        out = _out_dir(args.out)
        if args.command == "scatter":
            return cmd_scatter(cfg, out)
        if args.command == "race":
            return cmd_race(cfg, out)
        if args.command == "check-hardy":
            if cfg.potential is None and "symbol" not in cfg.hardy:
                raise ConfigError("potential: missing (needed for the default transmission symbol)")
            return cmd_check_hardy(cfg, out)
        seed = cfg.seed if args.seed is None else _seed(args.seed, "--seed")
        if args.approach is None and "approach" not in cfg.raw:
            cfg.approach = "I"
        return cmd_sweep(cfg, out, args.cases, seed, args.workers)
    except NumericalHealthError as exc:
        return _error("numerical_health", exc, EXIT_HEALTH)
    except (ConfigError, RaceConfigError, PotentialError, GridError, DetectorError, ModelError) as exc:
        return _error("config", exc, EXIT_CONFIG)
    except OutputError as exc:
        return _error("output", exc, EXIT_CONFIG)
    except (ScatteringError, RaceError) as exc:
        return _error("numerical_health", exc, EXIT_HEALTH)
    except (KeyError, TypeError, ValueError) as exc:
        return _error("config", exc, EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
