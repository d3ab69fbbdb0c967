"""Command-line front end: simulate, estimate, cv and forecast.

Every command reads optional settings from ``--config`` (JSON or TOML, keys
named like the long flags with dashes replaced by underscores); flags given
on the command line take precedence.  Exit status is 0 on success, 1 on
usage or input errors and 2 when backfitting does not converge (outputs are
still written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

from .backfit import BackfitConfig, backfit
from .bandwidth import select_bandwidth
from .data import (
    bin_events,
    build_occurrence_exposure,
    load_events,
    load_triangle,
    occurrence_exposure_from_events,
    save_events,
    save_triangle,
)
from .forecast import cash_flow, chain_ladder, comparison_table, conditional_density
from .kernels import KERNELS
from .reporting import dumps_json, long_csv, matrix_csv, write_text
from .simulation import SimScenario, acceptance_probability, simulate
from .smoothing import smooth

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2

DEFAULTS = {
    "out": ".",
    "workers": None,
    "seed": None,
    "bin_width": 1.0,
    "kernel": "epanechnikov",
    "method": "ll",
    "bandwidth": None,
    "candidates": None,
    "tolerance": 1e-8,
    "max_iter": 500,
    "periods": None,
    "baseline": "none",
    "events": None,
    "triangle": None,
    "horizon": None,
    "zero_delay": "event",
    "leave_out": "event",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bandwidth(text):
    parts = [p for p in str(text).replace(" ", "").split(",") if p]
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad bandwidth {text!r}; expected b0,b1") from None
    if len(vals) not in (1, 2) or not all(v > 0 for v in vals):
        raise argparse.ArgumentTypeError(f"bad bandwidth {text!r}; expected positive b0,b1")
    return vals if len(vals) == 2 else vals * 2


def _candidates(text):
    """``"2,2;3,3"`` or ``"2,3x2,4"`` (grid product of b0 and b1 lists)."""
    text = str(text).replace(" ", "")
    if "x" in text:
        left, right = text.split("x", 1)
        b0 = [float(v) for v in left.split(",") if v]
        b1 = [float(v) for v in right.split(",") if v]
        return [(a, b) for a in b0 for b in b1]
    return [_bandwidth(p) for p in text.split(";") if p]


def _shared(p: argparse.ArgumentParser, data=True, fit=True):
    p.add_argument("--config", help="JSON or TOML file with default settings")
    p.add_argument("--out", help="output directory (default: current directory)")
    p.add_argument("--workers", type=int, help="worker threads for parallel stages (default: CPU count)")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--bin-width", type=float, help="grid cell width in time units (default 1)")
    if data:
        p.add_argument("--events", help="event CSV with columns delay,underwriting")
        p.add_argument("--horizon", type=float, help="observation horizon R0 of the event file")
        p.add_argument("--triangle", help="run-off triangle file (rows underwriting, columns delay)")
        p.add_argument(
            "--zero-delay",
            choices=("event", "censor"),
            help="treat events at delay 0 as occurrences or as censored at R0 (default event)",
        )
    if fit:
        p.add_argument("--kernel", choices=sorted(KERNELS), help="kernel (default epanechnikov)")
        p.add_argument("--method", choices=("ll", "lc"), help="local linear or local constant (default ll)")
        p.add_argument("--bandwidth", type=_bandwidth, help="bandwidth b0,b1 in cells")
        p.add_argument("--candidates", type=_candidates, help="CV candidates: '2,2;3,3' or grid '2,3,4x2,3'")
        p.add_argument("--leave-out", choices=("event", "cell"), help="CV leave-out unit (default event)")
        p.add_argument("--tolerance", type=float, help="backfitting tolerance (default 1e-8)")
        p.add_argument("--max-iter", type=int, help="maximum backfitting sweeps (default 500)")
    p.add_argument("--periods", type=int, help="number of future periods M (default r0)")
    p.add_argument("--baseline", choices=("none", "clm"), help="add a chain-ladder comparison (default none)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sbhazard", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("simulate", help="draw a synthetic portfolio from a scenario config")
    _shared(p, data=False, fit=False)
    for name, helptext in (
        ("estimate", "smooth, backfit and export surfaces for a fixed bandwidth"),
        ("cv", "score candidate bandwidths by cross-validation"),
        ("forecast", "estimate and forecast the reserve and cash flows"),
    ):
        _shared(sub.add_parser(name, help=helptext))
    return parser


def _load_config(path) -> dict:
    if not path:
        return {}
    p = Path(path)
    raw = p.read_bytes()
    if p.suffix.lower() == ".toml":
        try:
            import tomllib as tomli
        except ModuleNotFoundError:  # Python < 3.11
            import tomli

        try:
            return tomli.loads(raw.decode("utf-8"))
        except tomli.TOMLDecodeError as exc:
            raise UsageError(f"{path}: {exc}") from None
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _settings(args) -> dict:
    cfg = _load_config(getattr(args, "config", None))
    out = dict(DEFAULTS)
    for key, value in cfg.items():
        key = key.replace("-", "_")
        if key == "bandwidth" and value is not None:
            value = _bandwidth(",".join(map(str, value)) if isinstance(value, list) else value)
        if key == "candidates" and value is not None:
            value = [_bandwidth(",".join(map(str, v))) for v in value] if isinstance(value, list) else _candidates(value)
        out[key] = value
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "command"):
            out[key] = value
    if out["workers"] is None:
        out["workers"] = os.cpu_count() or 1
    if int(out["workers"]) < 1:
        raise UsageError("--workers must be at least 1")
    return out


def _backfit_config(s) -> BackfitConfig:
    try:
        return BackfitConfig(max_iterations=int(s["max_iter"]), tolerance=float(s["tolerance"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_data(s):
    """Return (grid, claims, triangle) from the configured input."""
    bw = float(s["bin_width"])
    if s["triangle"]:
        tri = load_triangle(s["triangle"], bin_width=bw)
        return build_occurrence_exposure(tri), tri, tri
    if s["events"]:
        if s["horizon"] is None:
            raise UsageError("--horizon is required with --events")
        sample = load_events(s["events"], float(s["horizon"]))
        grid = occurrence_exposure_from_events(sample, bw, censor_zero_delay=s["zero_delay"] == "censor")
        return grid, sample, bin_events(sample, bw)
    raise UsageError("give --events (with --horizon) or --triangle")


def _outdir(s) -> Path:
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fit(grid, s, bandwidth, log):
    cfg = _backfit_config(s)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        surface = smooth(grid, s["kernel"], bandwidth, s["method"])
        fit = backfit(surface, cfg)
    log["warnings"] = sorted({str(w.message) for w in caught})
    log.update(
        {
            "bandwidth": [float(b) for b in surface.bandwidth],
            "kernel": surface.kernel,
            "method": surface.method,
            "clip_count": surface.clip_count,
            "fallback_count": surface.fallback_count,
            "residual": fit.residual,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "tolerance": cfg.tolerance,
        }
    )
    return surface, fit


def _select(grid, s, log):
    cands = s["candidates"]
    if not cands:
        raise UsageError("give --bandwidth or --candidates")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        table = select_bandwidth(
            grid,
            s["kernel"],
            cands,
            _backfit_config(s),
            s["method"],
            workers=int(s["workers"]),
            leave_out=s["leave_out"],
        )
    log["cv_best"] = list(table.best)
    return table


def cmd_simulate(s) -> int:
    cfg = _load_config(s.get("config"))
    data = cfg.get("scenario", cfg)
    if not data:
        raise UsageError("simulate needs --config with a scenario")
    try:
        scenario = SimScenario.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"bad scenario: {exc}") from None
    if s["seed"] is not None:
        scenario = SimScenario.from_dict({**scenario.to_dict(), "seed": int(s["seed"])})
    sample = simulate(scenario)
    out = _outdir(s)
    save_events(sample, out / "events.csv")
    save_triangle(bin_events(sample, float(s["bin_width"])), out / "triangle.csv")
    meta = {
        "scenario": scenario.to_dict(),
        "retained": len(sample),
        "acceptance_probability": acceptance_probability(scenario),
    }
    write_text(out / "simulation.json", dumps_json(meta))
    print(f"wrote {len(sample)} events to {out / 'events.csv'}")
    return EXIT_OK


def cmd_estimate(s) -> int:
    grid, _, _ = _load_data(s)
    if s["bandwidth"] is None:
        raise UsageError("estimate needs --bandwidth")
    log = {}
    surface, fit = _fit(grid, s, s["bandwidth"], log)
    out = _outdir(s)
    write_text(out / "hazard.csv", matrix_csv(surface.hazard, surface.valid))
    write_text(out / "hazard_long.csv", long_csv(surface.hazard, surface.valid, "hazard"))
    write_text(out / "occurrence_smoothed.csv", matrix_csv(surface.smoothed_occurrence, surface.support))
    write_text(out / "exposure_smoothed.csv", matrix_csv(surface.smoothed_exposure, surface.support))
    write_text(out / "structured_long.csv", long_csv(fit.product(), surface.support, "hazard"))
    write_text(out / "fit.json", fit.to_json() + "\n")
    write_text(out / "diagnostics.json", dumps_json(log))
    print(f"residual {fit.residual:.3e} after {fit.iterations} sweeps; converged={fit.converged}")
    return EXIT_OK if fit.converged else EXIT_NONCONVERGED


def cmd_cv(s) -> int:
    grid, _, _ = _load_data(s)
    if not s["candidates"] and s["bandwidth"]:
        s["candidates"] = [s["bandwidth"]]
    log = {}
    out = _outdir(s)
    try:
        table = _select(grid, s, log)
    except ValueError as exc:
        if "no candidate bandwidth converged" not in str(exc):
            raise
        print(str(exc), file=sys.stderr)
        return EXIT_NONCONVERGED
    write_text(out / "cv_report.csv", table.to_csv())
    print(f"selected bandwidth {table.best[0]!r},{table.best[1]!r} (score {table.best_score!r})")
    return EXIT_OK


def cmd_forecast(s) -> int:
    grid, claims, triangle = _load_data(s)
    log = {}
    out = _outdir(s)
    bandwidth = s["bandwidth"]
    if bandwidth is None:
        table = _select(grid, s, log)
        write_text(out / "cv_report.csv", table.to_csv())
        bandwidth = table.best
    surface, fit = _fit(grid, s, bandwidth, log)
    density = conditional_density(fit)
    periods = int(s["periods"] or density.r0)
    if periods < 1:
        raise UsageError("--periods must be at least 1")
    diag = {k: log[k] for k in ("bandwidth", "clip_count", "residual")}
    ph = cash_flow(claims, density, periods, **diag)
    write_text(out / "forecast.json", ph.to_json() + "\n")
    write_text(out / "cash_flow.csv", ph.to_csv())
    write_text(out / "fit.json", fit.to_json() + "\n")
    write_text(out / "diagnostics.json", dumps_json(log))
    if s["baseline"] == "clm":
        clm = chain_ladder(triangle, periods)
        write_text(out / "comparison.csv", comparison_table([ph, clm]))
        write_text(out / "forecast_clm.json", clm.to_json() + "\n")
    print(f"reserve {ph.total:.6g} over {periods} periods")
    return EXIT_OK if fit.converged else EXIT_NONCONVERGED


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "cv": cmd_cv, "forecast": cmd_forecast}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        s = _settings(args)
        s["config"] = args.config
        return COMMANDS[args.command](s)
    except (UsageError, OSError, ValueError) as exc:
        print(f"sbhazard {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
