"""Command-line front end: ``bcpd <subcommand> --map builtin:fig2 ...``.

Exit codes: 0 success, 2 configuration error, 3 mathematical degeneracy,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .center_manifold import COND_TOL, nd_unfold, reduce
from .continuation import (ContinuationOptions, VERIFY_TOL, detect_codim2, sweep_1param,
                           trace_bc_fixed_curve, trace_bc_twocycle_curve, trace_pd_curve,
                           trace_sn_twocycle_curve, sn_emanation_points, write_curves_csv,
                           write_plot_recipe, write_sweep_csv)
from .errors import (BcpdError, ConfigurationError, DegeneracyError, NumericalError,
                     PreconditionsNotMet)
from .linalg_bc import EIG_TOL, feigin_classify
from .orbit_lab import RECURRENCE_TOL, chaos_certificate, search_periodic_orbits
from .pws_map import DEFAULT_ESCAPE_RADIUS, resolve_map
from .second_iterate import h2_numeric
from .unfolding1d import PANEL_LEGEND, SINGULARITY_TOL, unfold

OUTPUT_ENV = "BCPD_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_NUMERICAL = 0, 2, 3, 4
CURVE_NAMES = ("pd", "bc2", "sn", "bc")
AUTO_ETA = "auto-below-h2"
AUTO_ETA_OFFSET = 0.02  # fraction of |mu| below h2 used by --eta auto-below-h2


@dataclass
class RunConfig:
    command: str
    map: str
    out: str
    jobs: int = 1
    params: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _window(text: str) -> tuple[str, tuple[float, float]]:
    m = re.fullmatch(r"\s*(mu|eta)\s*=\s*\[\s*([^,\]]+)\s*,\s*([^\]]+)\s*\]\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"window must look like mu=[lo,hi], got {text!r}")
    lo, hi = float(m.group(2)), float(m.group(3))
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"empty window {text!r}")
    return m.group(1), (lo, hi)


def _grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be start:stop:intervals")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if n < 1 or not lo < hi:
        raise argparse.ArgumentTypeError("grid needs start < stop and at least one interval")
    return np.linspace(lo, hi, n + 1)


def _curves(text: str) -> list[str]:
    names = [c.strip() for c in text.split(",") if c.strip()]
    bad = [c for c in names if c not in CURVE_NAMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown curve(s) {bad}; choose from {CURVE_NAMES}")
    return names


def _eta_or_auto(text: str):
    return text if text == AUTO_ETA else float(text)


def _seed(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bcpd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--map", required=True, help="builtin:fig2, builtin:pdmapex or a TOML/JSON file")
        sp.add_argument("--out", default=None, help=f"output directory (default: ${OUTPUT_ENV} or ./bcpd_out)")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        return sp

    sp = add("classify", "Feigin classification of the border collision at mu = 0")
    sp.add_argument("--eta", type=float, default=0.0)

    add("unfold", "unfolding coefficients, h-curves and scenario panel")
    add("reduce", "center-manifold reduction to a 1D left half-map")

    sp = add("trace", "continue bifurcation curves in the (mu, eta) plane")
    sp.add_argument("--curves", type=_curves, default=["pd", "bc2", "sn"])
    sp.add_argument("--window", type=_window, nargs="+", default=[])
    sp.add_argument("--allow-virtual", action="store_true")
    sp.add_argument("--step-init", type=float, default=1e-3)
    sp.add_argument("--step-min", type=float, default=1e-7)
    sp.add_argument("--step-max", type=float, default=1e-2)
    sp.add_argument("--max-steps", type=int, default=5000)

    sp = add("sweep", "attractor diagram along mu at fixed eta")
    sp.add_argument("--eta", type=float, required=True)
    sp.add_argument("--mu", type=_grid, required=True, help="start:stop:intervals")
    sp.add_argument("--seed", type=_seed, action="append", default=None,
                    help="initial state, comma separated; repeat for several branches")
    sp.add_argument("--transient", type=int, default=2000)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--no-refine", action="store_true")

    sp = add("chaos", "trapping-interval chaos certificate (1D maps)")
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--eta", type=_eta_or_auto, required=True, help=f"value or {AUTO_ETA}")
    sp.add_argument("--grid", type=int, default=10_000)

    sp = add("orbits", "periodic orbits by itinerary Newton search")
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--eta", type=float, required=True)
    sp.add_argument("--n-max", type=int, default=6)
    sp.add_argument("--domain", type=float, default=None)
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    params = {k: v for k, v in vars(args).items() if k not in ("command", "map", "out", "jobs")}
    out = args.out or os.environ.get(OUTPUT_ENV) or "bcpd_out"
    if args.jobs < 1:
        raise ConfigurationError("--jobs must be at least 1")
    return RunConfig(args.command, args.map, out, args.jobs, params)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    if isinstance(v, (complex, np.complexfloating)):
        return str(complex(v))
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    return v


def _write_json(path: Path, obj):
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _print_record(title: str, rec: dict):
    print(title)
    width = max(len(k) for k in rec) if rec else 0
    for k in sorted(rec):
        v = rec[k]
        if isinstance(v, float):
            v = f"{v:.12g}"
        print(f"  {k:<{width}}  {v}")


class Run:
    """Output directory plus the manifest being assembled."""

    def __init__(self, cfg: RunConfig, tolerances: dict):
        self.cfg = cfg
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.partial = False
        self.notes: list[str] = []
        self.tolerances = tolerances
        self.t0 = time.perf_counter()

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name

    def finish(self):
        manifest = {
            "command": self.cfg.command,
            "map": self.cfg.map,
            "inputs": self.cfg.params,
            "jobs": self.cfg.jobs,
            "tolerances": self.tolerances,
            "tool_version": __version__,
            "files": sorted(self.files),
            "partial": self.partial,
            "notes": self.notes,
            "wall_time_s": round(time.perf_counter() - self.t0, 3),
        }
        _write_json(self.dir / f"{self.cfg.command}_manifest.json", manifest)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_classify(cfg: RunConfig):
    m = resolve_map(cfg.map)
    run = Run(cfg, {"eigenvalue_tol": EIG_TOL})
    rep = feigin_classify(m, cfg.params["eta"])
    rec = rep.to_record()
    _print_record("Feigin classification", rec)
    _write_json(run.path("classify.json"), rec)
    run.finish()
    if rep.degenerate_flags:
        raise DegeneracyError("degenerate classification: " + ", ".join(rep.degenerate_flags))
    return rep


def cmd_unfold(cfg: RunConfig):
    m = resolve_map(cfg.map)
    run = Run(cfg, {"singularity_tol": SINGULARITY_TOL, "condition_tol": COND_TOL})
    if m.dim == 1:
        rec = unfold(m).to_record()
    else:
        rec = nd_unfold(m).to_record()
    _print_record("Unfolding", rec)
    legend = PANEL_LEGEND.get(rec["panel"], "boundary case")
    print(f"  panel {rec['panel']}: {legend}")
    _write_json(run.path("unfold.json"), rec)
    run.finish()
    return rec


def cmd_reduce(cfg: RunConfig):
    m = resolve_map(cfg.map)
    run = Run(cfg, {"condition_tol": COND_TOL})
    res = reduce(m)
    table = res.coefficient_table()
    print("Reduced left half-map (hatted parameters)")
    for name, value in table:
        print(f"  {name:<10} {value: .12g}")
    print("Condition margins")
    for k, v in res.conditions.to_record().items():
        print(f"  {k:<22} {v}")
    _write_json(run.path("reduce.json"), res.to_record())
    with open(run.path("reduce_coefficients.csv"), "w") as fh:
        fh.write("monomial,coefficient\n")
        for name, value in table:
            fh.write(f"{name},{value!r}\n")
    run.finish()
    return res


def _trace_job(job):
    m, name, kwargs, opts = job
    fn = {"pd": trace_pd_curve, "bc2": trace_bc_twocycle_curve,
          "sn": trace_sn_twocycle_curve, "bc": trace_bc_fixed_curve}[name]
    try:
        return fn(m, opts=opts, **kwargs), None
    except BcpdError as exc:
        return None, f"{name} {kwargs}: {type(exc).__name__}: {exc}"


def cmd_trace(cfg: RunConfig):
    m = resolve_map(cfg.map)
    p = cfg.params
    windows = dict(p["window"])
    opts = ContinuationOptions(step_init=p["step_init"], step_min=p["step_min"],
                               step_max=p["step_max"], max_steps=p["max_steps"],
                               allow_virtual=p["allow_virtual"])
    if "mu" in windows:
        opts.mu_window = windows["mu"]
    if "eta" in windows:
        opts.eta_window = windows["eta"]
    run = Run(cfg, {"newton_tol": opts.newton_tol, "verify_tol": VERIFY_TOL,
                    "step_init": opts.step_init, "step_min": opts.step_min,
                    "step_max": opts.step_max})
    codim2 = [c for c in detect_codim2(m, opts.eta_window)]
    jobs = []
    for c in codim2:
        if c.error:
            run.notes.append(f"codim-2 point eta={c.eta!r} side={c.side}: {c.error}")
            continue
        kw = {"side": c.side, "eta0": c.eta}
        for name in ("pd", "bc2"):
            if name in p["curves"]:
                jobs.append((m, name, kw, opts))
    if "sn" in p["curves"]:
        for e in sn_emanation_points(m, opts.eta_window):
            jobs.append((m, "sn", {"eta_sn": e}, opts))
    if "bc" in p["curves"]:
        jobs.append((m, "bc", {}, opts))
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_trace_job, jobs))
    else:
        results = [_trace_job(j) for j in jobs]
    curves = []
    for curve, err in results:
        if err:
            run.partial = True
            run.notes.append(err)
        else:
            curves.append(curve)
    curves.sort(key=lambda c: (CURVE_KINDS_ORDER[c.kind], c.side, c.points[0].eta, c.points[0].mu))
    write_curves_csv(curves, run.path("curves.csv"), run.path("special_points.csv"))
    write_plot_recipe(run.path("curves_plot.json"), {"curves": "curves.csv",
                                                      "special_points": "special_points.csv"}, "curves")
    for c in curves:
        print(f"{c.kind:<12} side={c.side} points={len(c.points):<5} "
              f"max_residual={c.max_residual:.2e} stops={','.join(c.stop_reasons)}")
        for s in c.special_points:
            print(f"    {s.type:<18} mu={s.mu:.10g} eta={s.eta:.10g} residual={s.residual:.1e}")
    run.finish()
    return curves


CURVE_KINDS_ORDER = {"BC_fixed": 0, "PD_fixed": 1, "BC_twocycle": 2, "SN_twocycle": 3}


def _sweep_job(job):
    m, eta, grid, seed, kw = job
    return sweep_1param(m, eta, grid, [seed], **kw)


def cmd_sweep(cfg: RunConfig):
    m = resolve_map(cfg.map)
    p = cfg.params
    seeds = p["seed"]
    if seeds is None:
        x0 = np.zeros(m.dim)
        x0[0] = -1e-2
        seeds = [x0]
    seeds = [np.asarray(s, dtype=float) for s in seeds]
    for s in seeds:
        if s.shape != (m.dim,):
            raise ConfigurationError(f"seed {s.tolist()} does not have dimension {m.dim}")
    kw = dict(n_transient=p["transient"], n_sample=p["samples"], refine=not p["no_refine"])
    run = Run(cfg, {"recurrence_tol": RECURRENCE_TOL, "escape_radius": DEFAULT_ESCAPE_RADIUS,
                    "n_transient": p["transient"], "n_sample": p["samples"]})
    jobs = [(m, p["eta"], p["mu"], s, kw) for s in seeds]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            parts = list(pool.map(_sweep_job, jobs))
    else:
        parts = [_sweep_job(j) for j in jobs]
    result = parts[0]
    for k, extra in enumerate(parts[1:], start=1):
        result.samples += extra.samples
        for t in extra.transitions:
            t.branch = k
        result.transitions += extra.transitions
    write_sweep_csv(result, run.path("sweep.csv"), run.path("transitions.csv"))
    write_plot_recipe(run.path("sweep_plot.json"), {"attractor": "sweep.csv",
                                                     "transitions": "transitions.csv"}, "sweep")
    for t in result.transitions:
        print(f"branch {t.branch}: {t.kind:<16} mu={t.mu:.10g}  {t.before} -> {t.after}")
    run.finish()
    return result


def cmd_chaos(cfg: RunConfig):
    m = resolve_map(cfg.map)
    p = cfg.params
    mu = p["mu"]
    eta = p["eta"]
    run = Run(cfg, {"n_grid": p["grid"], "auto_eta_offset": AUTO_ETA_OFFSET})
    if eta == AUTO_ETA:
        if not mu < 0:
            raise PreconditionsNotMet([f"mu = {mu} is not < 0"])
        rep = unfold(m)
        h2 = h2_numeric(m, mu)
        eta = h2 - np.sign(rep.eta_scale) * AUTO_ETA_OFFSET * abs(mu) / abs(rep.eta_scale)
        run.notes.append(f"eta chosen below h2 = {h2!r}: {eta!r}")
    cert = chaos_certificate(m, mu, float(eta), n_grid=p["grid"])
    rec = dict(cert.to_record(), mu=mu, eta=float(eta))
    _print_record("Chaos certificate", rec)
    _write_json(run.path("chaos.json"), rec)
    run.finish()
    return cert


def cmd_orbits(cfg: RunConfig):
    m = resolve_map(cfg.map)
    p = cfg.params
    run = Run(cfg, {"recurrence_tol": RECURRENCE_TOL})
    res = search_periodic_orbits(m, p["mu"], p["eta"], p["n_max"], domain=p["domain"])
    rows = [o.to_record() for o in res.orbits]
    keys = sorted({k for r in rows for k in r})
    with open(run.path("orbits.csv"), "w") as fh:
        fh.write(",".join(keys) + "\n")
        for r in rows:
            fh.write(",".join(repr(r.get(k, "")) if not isinstance(r.get(k), str) else r[k]
                              for k in keys) + "\n")
    for o in res.orbits:
        print(f"period {o.period:<3} {o.itinerary:<12} stable={o.stable}  s0={o.points[0][0]:.10g}")
    if res.unresolved:
        run.partial = True
        run.notes.append("unresolved words: " + ",".join(res.unresolved))
    run.finish()
    return res


COMMANDS = {"classify": cmd_classify, "unfold": cmd_unfold, "reduce": cmd_reduce,
            "trace": cmd_trace, "sweep": cmd_sweep, "chaos": cmd_chaos, "orbits": cmd_orbits}


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(exc, (DegeneracyError, PreconditionsNotMet)):
        return EXIT_DEGENERATE
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_NUMERICAL


# flags whose values may start with "-" without being plain numbers
DASH_VALUE_FLAGS = ("--mu", "--eta", "--seed")


def _attach_negative_values(argv: list[str]) -> list[str]:
    """Rewrite ``--mu -0.3:0.05:600`` as ``--mu=-0.3:0.05:600``.

    argparse only accepts a dash-prefixed value when it parses as a plain
    negative number, which grids and seed lists do not.
    """
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in DASH_VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1][:1] == "-" \
                and argv[i + 1][:2] != "--":
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_attach_negative_values(argv))
    try:
        cfg = config_from_args(args)
        COMMANDS[cfg.command](cfg)
    except BcpdError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
