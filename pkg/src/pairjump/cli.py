"""Command-line front end: ``run``, ``sweep`` and ``compare``.

Every command writes a CSV whose first line points at a JSON manifest
(``<out>.json``) holding the configuration and run metadata.  Exit codes:
0 on success, 2 for invalid arguments or unwritable output, 1 when the
simulation itself fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .ensemble import (DEFAULT_FIT_CT, EnsembleError, fit_growth_rate, resolve_threads,
                       run_ensemble)
from .model import COUPLING_SCALINGS, SpinStarModel
from .oracle import spin_star_occupation
from .propagator import IntegrationParams
from .stochastic import Scheme

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RUN_COLUMNS = ("t", "mean_norm", "lambda_stat", "n_plus", "n_plus_std", "n_plus_stderr",
               "n_plus_exact")
COMPARE_COLUMNS = ("t", "n_plus_mc", "n_plus_stderr", "n_plus_exact", "abs_error",
                   "error_in_stderr_units")
SWEEP_COLUMNS = ("kind", "axis", "value", "method", "lambda_s", "residual", "dead_trajectories")


class UsageError(ValueError):
    """Invalid configuration; reported with exit code 2."""


def fmt(x) -> str:
    """Twelve significant digits, the precision of every number in the CSVs."""
    return f"{float(x):.12g}"


@dataclass(frozen=True)
class RunConfig:
    method: str
    n_bath: int
    coupling: float
    n_traj: int
    dt: float = 0.01
    t_max: float = 3.0
    seed: int = 0
    out_path: str = "run.csv"
    stride: int = 10
    coupling_scaling: str = "n"
    fit_window_ct: tuple = DEFAULT_FIT_CT

    def validate(self) -> "RunConfig":
        try:
            Scheme.parse(self.method)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        for name in ("n_bath", "n_traj", "stride"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise UsageError(f"{name} must be a positive integer, got {value}")
        for name in ("coupling", "dt", "t_max"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise UsageError(f"{name} must be positive, got {value}")
        if self.t_max < self.dt:
            raise UsageError("t_max must be at least one time step")
        if not 0 <= self.seed < 2 ** 64:
            raise UsageError("seed must be an unsigned 64-bit integer")
        if self.coupling_scaling not in COUPLING_SCALINGS:
            raise UsageError(f"coupling scaling must be one of {COUPLING_SCALINGS}")
        lo, hi = self.fit_window_ct
        if not (0 <= lo < hi):
            raise UsageError(f"fit window must satisfy 0 <= lo < hi, got {self.fit_window_ct}")
        return self

    @property
    def model(self) -> SpinStarModel:
        return SpinStarModel(self.n_bath, self.coupling, self.coupling_scaling)

    @property
    def params(self) -> IntegrationParams:
        return IntegrationParams.from_tmax(self.dt, self.t_max)

    def manifest_dict(self) -> dict:
        d = asdict(self)
        d["fit_window_ct"] = list(self.fit_window_ct)
        return d


@dataclass
class Outcome:
    stats: object
    lambda_s: float | None
    fit_window: list | None
    wall_seconds: float
    extra: dict = field(default_factory=dict)


def manifest_path(out: Path) -> Path:
    return out.with_suffix(".json")


def check_writable(out: Path) -> None:
    parent = out.parent if str(out.parent) else Path(".")
    if out.is_dir():
        raise UsageError(f"output path {out} is a directory")
    if not parent.is_dir():
        raise UsageError(f"output directory {parent} does not exist")
    if not os.access(parent, os.W_OK):
        raise UsageError(f"output directory {parent} is not writable")


def write_csv(out: Path, columns, rows) -> None:
    with open(out, "w", newline="") as f:
        f.write(f"# manifest: {manifest_path(out)}\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(r if isinstance(r, str) else fmt(r) for r in row) + "\n")


def write_manifest(out: Path, payload: dict) -> None:
    with open(manifest_path(out), "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def read_csv(path) -> tuple[str, list[str], list[list[str]]]:
    """Parse a CSV written by this module: ``(manifest path, header, rows)``."""
    with open(path) as f:
        first = f.readline().rstrip("\n")
        header = f.readline().rstrip("\n").split(",")
        rows = [line.rstrip("\n").split(",") for line in f if line.strip()]
    return first.removeprefix("# manifest: "), header, rows


def fit_in_window(stats, cfg: RunConfig, t_end: float):
    """Fit on the ``C t`` window clipped to the simulated range; ``None`` if too short."""
    lo = cfg.fit_window_ct[0] / cfg.coupling
    hi = min(cfg.fit_window_ct[1] / cfg.coupling, t_end)
    try:
        fit = fit_growth_rate(stats, (lo, hi))
    except ValueError as exc:
        log.warning("no growth-rate fit: %s", exc)
        return None, None
    return fit.lambda_s, [lo, hi]


def simulate(cfg: RunConfig, threads=None) -> Outcome:
    start = time.perf_counter()
    params = cfg.params
    stats = run_ensemble(cfg.model, cfg.method, cfg.n_traj, params, cfg.seed, threads=threads)
    lam, window = fit_in_window(stats, cfg, params.times[-1])
    return Outcome(stats, lam, window, time.perf_counter() - start)


def manifest_payload(cfg: RunConfig, outcome: Outcome, command: str) -> dict:
    return {
        "command": command,
        "config": cfg.manifest_dict(),
        "schema_version": SCHEMA_VERSION,
        "dead_trajectories": int(outcome.stats.dead_count),
        "lambda_s": outcome.lambda_s,
        "fit_window": outcome.fit_window,
        "wall_seconds": outcome.wall_seconds,
        "package_version": __version__,
        "kernel_backend": kernels.BACKEND,
        **outcome.extra,
    }


def run_command(cfg: RunConfig, threads=None) -> Outcome:
    out = Path(cfg.out_path)
    check_writable(out)
    outcome = simulate(cfg, threads)
    s = outcome.stats
    idx = np.arange(0, len(s.times), cfg.stride)
    exact = spin_star_occupation(cfg.model, s.times[idx])
    rows = zip(s.times[idx], s.mean_norm[idx], s.lambda_stat[idx], s.n_plus_mean[idx],
               s.n_plus_std[idx], s.n_plus_stderr[idx], exact)
    write_csv(out, RUN_COLUMNS, rows)
    write_manifest(out, manifest_payload(cfg, outcome, "run"))
    return outcome


def compare_command(cfg: RunConfig, threads=None) -> Outcome:
    out = Path(cfg.out_path)
    check_writable(out)
    outcome = simulate(cfg, threads)
    s = outcome.stats
    idx = np.arange(0, len(s.times), cfg.stride)
    exact = spin_star_occupation(cfg.model, s.times[idx])
    err = np.abs(s.n_plus_mean[idx] - exact)
    se = s.n_plus_stderr[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        units = np.where(se > 0, err / se, np.where(err > 0, np.inf, 0.0))
    write_csv(out, COMPARE_COLUMNS, zip(s.times[idx], s.n_plus_mean[idx], se, exact, err, units))
    outcome.extra = {"max_error_in_stderr_units": float(units.max()) if units.size else 0.0}
    write_manifest(out, manifest_payload(cfg, outcome, "compare"))
    return outcome


def proportionality_fit(x, y) -> tuple[float, float]:
    """Through-origin least squares ``y = k x``; residual is ``rms(y - k x) / rms(x)``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    k = float(x @ y / (x @ x))
    resid = float(np.sqrt(np.mean((y - k * x) ** 2)) / np.sqrt(np.mean(x ** 2)))
    return k, resid


def sweep_command(base: RunConfig, axis: str, values, methods, threads=None) -> dict:
    """One fitted ``lambda_s`` per (value, method), then one fit row per method.

    Each point is simulated up to the end of its fit window, ``C t_max`` =
    window end; ``base.t_max`` is not used.
    """
    if axis not in ("coupling", "nbath"):
        raise UsageError(f"unknown sweep axis {axis!r}")
    values = list(values)
    if len(values) < 2:
        raise UsageError("a sweep needs at least two axis values")
    methods = [Scheme.parse(m).value for m in methods]
    out = Path(base.out_path)
    check_writable(out)
    start = time.perf_counter()
    rows, fits, points = [], {}, []
    for method in methods:
        lams, xs = [], []
        for v in values:
            if axis == "coupling":
                cfg = _replace(base, method=method, coupling=float(v))
            else:
                cfg = _replace(base, method=method, n_bath=int(v))
            cfg = _replace(cfg, t_max=cfg.fit_window_ct[1] / cfg.coupling).validate()
            outcome = simulate(cfg, threads)
            if outcome.lambda_s is None:
                raise EnsembleError(f"no growth-rate fit for {axis}={v}, {method}")
            # fit on the printed values so the summary rows reproduce from the file
            lam = float(fmt(outcome.lambda_s))
            rows.append(("point", axis, fmt(v), method, lam, fmt(0.0),
                         fmt(outcome.stats.dead_count)))
            points.append({"value": v, "method": method, "lambda_s": lam,
                           "dead_trajectories": int(outcome.stats.dead_count)})
            lams.append(lam)
            xs.append(float(v) if axis == "coupling" else math.sqrt(int(v)))
        k, resid = proportionality_fit(xs, lams)
        fits[method] = {"k": k, "residual": resid,
                        "form": "lambda_s = k * C" if axis == "coupling"
                        else "lambda_s = k * sqrt(N)"}
        rows.append(("fit", axis, "", method, k, resid, ""))
    write_csv(out, SWEEP_COLUMNS, rows)
    payload = {
        "command": "sweep",
        "config": base.manifest_dict(),
        "axis": axis,
        "values": values,
        "methods": methods,
        "points": points,
        "fits": fits,
        "schema_version": SCHEMA_VERSION,
        "dead_trajectories": sum(p["dead_trajectories"] for p in points),
        "lambda_s": None,
        "fit_window": list(base.fit_window_ct),
        "wall_seconds": time.perf_counter() - start,
        "package_version": __version__,
        "kernel_backend": kernels.BACKEND,
    }
    write_manifest(out, payload)
    return payload


def _replace(cfg: RunConfig, **changes) -> RunConfig:
    d = asdict(cfg)
    d.update(changes)
    return RunConfig(**d)


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (math.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _scheme(text):
    try:
        return Scheme.parse(text).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_common(p, with_method=True, with_tmax=True):
    if with_method:
        p.add_argument("--method", type=_scheme, required=True,
                       help="sse, osse, smf or osmf")
    p.add_argument("--nbath", type=_positive_int, default=1, help="bath spins N (default 1)")
    p.add_argument("--coupling", type=_positive_float, default=0.5, help="coupling C (default 0.5)")
    p.add_argument("--coupling-scaling", choices=COUPLING_SCALINGS, default="n",
                   help="per-spin coupling C/N (n, default) or C/sqrt(N) (sqrt_n)")
    p.add_argument("--ntraj", type=_positive_int, required=True, help="number of trajectory pairs")
    p.add_argument("--dt", type=_positive_float, default=0.01, help="time step (default 0.01)")
    if with_tmax:
        p.add_argument("--tmax", type=_positive_float, default=3.0,
                       help="final time (default 3.0)")
    p.add_argument("--seed", type=_seed, default=0, help="master seed (default 0)")
    p.add_argument("--out", required=True, help="CSV output path; the manifest goes next to it")
    p.add_argument("--stride", type=_positive_int, default=10,
                   help="write every stride-th step (default 10)")
    p.add_argument("--fit-window", type=float, nargs=2, metavar=("CT_LO", "CT_HI"),
                   default=DEFAULT_FIT_CT, help="growth-rate fit window in units of C t "
                   f"(default {DEFAULT_FIT_CT[0]} {DEFAULT_FIT_CT[1]})")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker threads (default: $PAIRJUMP_THREADS or the CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairjump",
        description="Stochastic pair-state simulations of the spin-star model.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("run", help="one ensemble; per-time statistics"))
    _add_common(sub.add_parser("compare", help="ensemble occupation against exact dynamics"))
    sweep = sub.add_parser("sweep", help="fitted growth rate across couplings or bath sizes")
    _add_common(sweep, with_method=False, with_tmax=False)
    sweep.add_argument("--axis", choices=("coupling", "nbath"), required=True)
    sweep.add_argument("--values", nargs="+", required=True, type=_positive_float,
                       help="axis values (bath sizes must be integers)")
    sweep.add_argument("--methods", nargs="+", type=_scheme, default=["sse", "osmf"],
                       help="schemes to sweep (default: sse osmf)")
    return parser


def _config(args) -> RunConfig:
    return RunConfig(
        method=getattr(args, "method", "sse"),
        n_bath=args.nbath,
        coupling=args.coupling,
        n_traj=args.ntraj,
        dt=args.dt,
        t_max=getattr(args, "tmax", 3.0),
        seed=args.seed,
        out_path=args.out,
        stride=args.stride,
        coupling_scaling=args.coupling_scaling,
        fit_window_ct=tuple(args.fit_window),
    ).validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        threads = resolve_threads(args.threads)
        cfg = _config(args)
        if args.command == "sweep":
            if args.axis == "nbath" and any(v != int(v) for v in args.values):
                raise UsageError("bath sizes must be integers")
            values = [int(v) for v in args.values] if args.axis == "nbath" else args.values
            payload = sweep_command(cfg, args.axis, values, args.methods, threads)
            for method, fit in payload["fits"].items():
                print(f"{method}: k = {fit['k']:.4g} ({fit['form']}), "
                      f"residual {fit['residual']:.3g}")
        else:
            command = run_command if args.command == "run" else compare_command
            outcome = command(cfg, threads)
            lam = "n/a" if outcome.lambda_s is None else f"{outcome.lambda_s:.4g}"
            print(f"{cfg.method}: lambda_s = {lam}, dead = {outcome.stats.dead_count}, "
                  f"{outcome.wall_seconds:.1f} s -> {cfg.out_path}")
    except UsageError as exc:
        print(f"pairjump: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # remaining invalid values surface from model/parameter constructors
        print(f"pairjump: error: {exc}", file=sys.stderr)
        return 2
    except (EnsembleError, ArithmeticError, OSError, MemoryError) as exc:
        print(f"pairjump: failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
