"""Command-line front end: run an experiment from a JSON config and write a
machine-readable report into a per-run directory.

Exit codes: 0 success, 2 invalid or missing config, 3 tolerance failure in a
check command (selftest, holder, bounds), 4 I/O error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checks import adjointness_suite, exterior_suite
from .currents import DiracCurrent, SimplexCurrent, current_from_json, pushforward, simplex_to_dirac
from .exterior import symbol_constant
from .pipeline import (
    ConfigError,
    ExperimentConfig,
    boundedness_check,
    decay_study,
    decompose,
    holder_check,
    invert,
    pair_via_projections,
    q_field,
    random_form_family,
)

log = logging.getLogger("kplane")

EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE, EXIT_IO = 0, 2, 3, 4

COMMANDS = ("selftest", "invert", "decompose", "project-current", "pair-via-projections", "holder", "bounds")


def _plain(value):
    """JSON fallback for numpy scalars and arrays."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


class ToleranceFailure(Exception):
    """A check command finished but its property did not hold."""


class RunContext:
    """Output directory, timings and optional CSV emission for one invocation."""

    def __init__(self, out: Path, emit_csv: bool):
        self.out = out
        self.emit_csv = emit_csv
        self.timings: dict[str, float] = {}
        self._t0 = time.perf_counter()

    def timed(self, name: str, func, *args, **kwargs):
        start = time.perf_counter()
        value = func(*args, **kwargs)
        self.timings[name] = round(time.perf_counter() - start, 6)
        log.info("%s took %.2fs", name, self.timings[name])
        return value

    def write_bytes(self, name: str, blob: bytes) -> str:
        (self.out / name).write_bytes(blob)
        return name

    def write_json(self, name: str, doc) -> str:
        (self.out / name).write_text(json.dumps(doc, indent=2, sort_keys=True, default=_plain) + "\n")
        return name

    @property
    def elapsed(self) -> float:
        return round(time.perf_counter() - self._t0, 6)


def _constants(cfg: ExperimentConfig) -> dict:
    big, small = cfg.spec.eigenvalues
    return {
        "symbol_constant": symbol_constant(cfg.n, cfg.k, cfg.m),
        "symbol_eigenvalues": [big, small],
    }


def _tolerance(cfg: ExperimentConfig, name: str, default: float) -> float:
    return float(cfg.doc["tolerances"].get(name, default))


def _current(cfg: ExperimentConfig) -> DiracCurrent:
    doc = cfg.doc["current"]
    if doc is None:
        raise ConfigError("this command needs a 'current' block in the config")
    try:
        current = current_from_json({"n": cfg.n, "m": cfg.m, **doc})
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid current: {exc}") from None
    if isinstance(current, SimplexCurrent):
        current = simplex_to_dirac(current, order=int(doc.get("order", 2)))
    if current.n != cfg.n or current.m != cfg.m:
        raise ConfigError("current dimension/degree disagree with n, m")
    return current


# -- commands -------------------------------------------------------------


def cmd_selftest(cfg: ExperimentConfig | None, ctx: RunContext) -> dict:
    seed = cfg.seed if cfg is not None else 0
    ext = ctx.timed("exterior_suite", exterior_suite, max_n=5, seed=seed)
    adj = ctx.timed("adjointness_suite", adjointness_suite, max_n=3, pairs=3, seed=seed)
    results = {"exterior_algebra": ext.to_json(), "adjointness": adj.to_json()}
    if not (ext.ok and adj.ok):
        raise ToleranceFailure(results)
    return results


def cmd_invert(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    alpha = cfg.form()
    result = ctx.timed("invert", invert, alpha, cfg)
    ctx.write_bytes("reconstruction.bin", result.reconstruction.to_bytes())
    if ctx.emit_csv:
        result.reconstruction.write_csv(ctx.out / "reconstruction.csv")
    out = {"rel_l2_error": result.rel_l2_error, "planes": cfg.doc["planes"]["count"], **_constants(cfg)}
    if "rel_l2_error" in cfg.doc["tolerances"]:
        out["within_tolerance"] = result.rel_l2_error <= _tolerance(cfg, "rel_l2_error", math.inf)
    return out


def cmd_decompose(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    alpha = cfg.form()
    result = ctx.timed("decompose", decompose, alpha, cfg)
    ctx.write_bytes("decomposition.bin", result.sinogram.to_bytes())
    ctx.write_json("planes.json", result.planes.to_json())
    # superposition of the pulled-back plane forms at probe points in |x| <= L/2
    rng = np.random.default_rng(cfg.streams()[1])
    d = rng.standard_normal((20, cfg.n))
    radius = 0.5 * cfg.grid.half_width * rng.uniform(size=(20, 1)) ** (1.0 / cfg.n)
    probes = radius * d / np.linalg.norm(d, axis=1, keepdims=True)
    approx = ctx.timed("superpose", result.superpose, probes)
    exact = alpha(probes)
    scale = float(np.abs(exact).max()) or 1.0
    if ctx.emit_csv:
        result.plane_form(0).write_csv(ctx.out / "plane_form_0.csv")
    return {
        "planes": len(result.planes),
        "config_hash": result.config_hash,
        "probe_points": probes.tolist(),
        "superposition_max_abs_error": float(np.abs(approx - exact).max()),
        "superposition_rel_error": float(np.abs(approx - exact).max()) / scale,
        **_constants(cfg),
    }


def cmd_project_current(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    T = _current(cfg)
    planes = cfg.planes()
    projections = []
    for P, w in planes:
        pc = pushforward(P, T)
        projections.append(
            {
                "frame": P.frame.tolist(),
                "weight": float(w),
                "positions": pc.positions.tolist(),
                "weights": pc.weights.tolist(),
            }
        )
    ctx.write_json("projections.json", {"n": cfg.n, "k": cfg.k, "m": cfg.m, "projections": projections})
    masses = [float(np.abs(np.asarray(p["weights"])).sum()) for p in projections]
    return {
        "atoms": len(T),
        "planes": len(planes),
        "current_mass": float(np.linalg.norm(T.weights, axis=1).sum()),
        "mean_projected_mass": float(np.mean(masses)),
    }


def cmd_pair(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    T = _current(cfg)
    alpha = cfg.form()
    qa = ctx.timed("q_field", q_field, alpha, cfg)
    result = ctx.timed("pair_via_projections", pair_via_projections, T, alpha, cfg, qa=qa)
    out = result.to_json()
    rel = _tolerance(cfg, "pairing_rel", 0.05)
    out["within_tolerance"] = result.within(rel=rel, sigmas=_tolerance(cfg, "pairing_sigmas", 3.0))
    if ctx.emit_csv:
        np.savetxt(ctx.out / "per_plane.csv", result.per_plane, delimiter=",", header="value", comments="")
    return out


def cmd_holder(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    alpha = cfg.form()
    qa = ctx.timed("q_field", q_field, alpha, cfg)
    report = ctx.timed("holder_check", holder_check, alpha, cfg, qa=qa)
    decay = ctx.timed("decay_study", decay_study, alpha, cfg)
    drift_tol = _tolerance(cfg, "holder_drift", 0.2)
    growth_tol = _tolerance(cfg, "decay_growth", 0.1)
    results = {"holder": report.to_json(), "decay": decay.to_json()}
    ok = bool(np.isfinite(report.ratios).all()) and report.drift <= drift_tol and decay.growth <= growth_tol
    results["ok"] = ok
    if ctx.emit_csv:
        rows = np.column_stack([report.distances, report.ratios])
        np.savetxt(ctx.out / "holder.csv", rows, delimiter=",", header="distance,ratio", comments="")
    if not ok:
        raise ToleranceFailure(results)
    return results


def cmd_bounds(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    rng = np.random.default_rng(cfg.streams()[2])
    family = random_form_family(cfg.n, cfg.m, cfg.doc["bounds"]["family_size"], rng)
    report = ctx.timed("boundedness_check", boundedness_check, family, cfg)
    results = report.to_json()
    slack = _tolerance(cfg, "bounds_slack", 0.15)
    inside = all(report.lower * (1 - slack) <= r <= report.upper * (1 + slack) for r in report.ratios)
    results["within_symbol_bounds"] = inside
    results["ok"] = report.ok and inside
    if not results["ok"]:
        raise ToleranceFailure(results)
    return results


HANDLERS = {
    "selftest": cmd_selftest,
    "invert": cmd_invert,
    "decompose": cmd_decompose,
    "project-current": cmd_project_current,
    "pair-via-projections": cmd_pair,
    "holder": cmd_holder,
    "bounds": cmd_bounds,
}


# -- driver ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kplane", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="experiment config (JSON)")
        p.add_argument("--out", type=Path, help="run directory (default: runs/<command>-<time>)")
        p.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
        p.add_argument("--threads", type=int, help="worker threads, 0 = one per CPU")
        p.add_argument("--emit-csv", action="store_true", help="also write CSV exports")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def resolve_config(args) -> ExperimentConfig | None:
    if args.config is None:
        if args.command == "selftest":
            return None
        raise ConfigError(f"'{args.command}' needs --config")
    cfg = ExperimentConfig.load(args.config)
    overrides = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        overrides["seed"] = args.seed
    if args.threads is not None:
        if args.threads < 0:
            raise ConfigError("--threads must be >= 0")
        overrides["threads"] = args.threads
    return cfg.replace(**overrides) if overrides else cfg


def _utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="milliseconds")


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"kplane: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    started = _utc_now()
    out = args.out or Path("runs") / f"{args.command}-{started.replace(':', '').replace('+0000', 'Z')}"
    try:
        out.mkdir(parents=True, exist_ok=True)
        if (out / "report.json").exists():
            raise FileExistsError(f"{out / 'report.json'} exists; run directories are never overwritten")
    except OSError as exc:
        print(f"kplane: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    ctx = RunContext(out, args.emit_csv)
    status, code = "ok", EXIT_OK
    try:
        results = HANDLERS[args.command](cfg, ctx)
    except ToleranceFailure as exc:
        results, status, code = exc.args[0], "tolerance_failure", EXIT_TOLERANCE
    except ConfigError as exc:
        print(f"kplane: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"kplane: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    report = {
        "command": args.command,
        "status": status,
        "version": __version__,
        "config": cfg.to_json() if cfg is not None else None,
        "config_hash": cfg.hash if cfg is not None else None,
        "results": results,
        "timestamps": {"started": started, "finished": _utc_now(), "elapsed_s": ctx.elapsed, "steps_s": ctx.timings},
    }
    try:
        ctx.write_json("report.json", report)
    except OSError as exc:
        print(f"kplane: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if code == EXIT_TOLERANCE:
        print(f"kplane: {args.command}: tolerance failure, see {out / 'report.json'}", file=sys.stderr)
    return code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
