"""Command-line front end.

    irsnoma run --config scenario.yaml --output-dir out/ [--trials N] [--seed S]
                [--schemes irs_noma,oma] [--snr 0,10,20] [--workers W]
    irsnoma config [--config scenario.yaml]

``run`` writes ``results.csv`` and ``manifest.json`` into the output
directory. ``config`` prints the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__, kernels
from .config import (SCHEMES, ScenarioConfig, config_to_dict, emit_config,
                     parse_config)
from .engine import BASELINE_ASSUMPTIONS, ScenarioResult, resolve_workers, run_scenario
from .errors import ConfigurationError

__all__ = ["main", "run", "parse_config", "CSV_HEADER", "format_csv", "build_manifest"]

CSV_HEADER = "scheme,snr_db,user,rate_bpcu,stderr,trials,rejected,L,chi_bs_u,chi_bs_irs,xi"


def _num(x) -> str:
    return format(float(x), ".9g")


def format_csv(result: ScenarioResult) -> str:
    cfg = result.cfg
    lines = [CSV_HEADER]
    for r in result.rates():
        lines.append(",".join([
            r.scheme, _num(r.snr_db), str(r.user), _num(r.ergodic_rate_bpcu),
            _num(r.stderr), str(r.trials), str(r.rejected_trials), str(cfg.L),
            _num(cfg.chi_bs_u), _num(cfg.chi_bs_irs), _num(cfg.xi),
        ]))
    return "\n".join(lines) + "\n"


def build_manifest(result: ScenarioResult, wall_time_s: float) -> dict:
    cfg = result.cfg
    return {
        "config_echo": config_to_dict(cfg),
        "seed": cfg.seed,
        "tool_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "wall_time_s": wall_time_s,
        "rejected_trial_counts": dict(result.rejected),
        "irs_nonconverged_subproblems": result.nonconverged,
        "scheme_assumptions": {s: BASELINE_ASSUMPTIONS[s] for s in cfg.schemes},
    }


def _csv_list(text: str, conv) -> List:
    return [conv(t.strip()) for t in text.split(",") if t.strip()]


def _resolve(args) -> ScenarioConfig:
    cfg = parse_config(args.config) if args.config else ScenarioConfig()
    changes = {}
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "schemes", None):
        changes["schemes"] = tuple(_csv_list(args.schemes, str))
    if getattr(args, "snr", None):
        changes["snr_grid_db"] = tuple(_csv_list(args.snr, float))
    return cfg.replace(**changes) if changes else cfg


def run(args) -> int:
    """Execute a ``run`` invocation; returns the process exit code."""
    try:
        cfg = _resolve(args)
    except (ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory not writable: {exc}", file=sys.stderr)
        return 3
    t0 = time.perf_counter()
    try:
        result = run_scenario(cfg, workers=resolve_workers(args.workers))
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    wall = time.perf_counter() - t0
    (out / "results.csv").write_text(format_csv(result))
    (out / "manifest.json").write_text(json.dumps(build_manifest(result, wall), indent=2) + "\n")
    return 0


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="irsnoma", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write results.csv + manifest.json")
    r.add_argument("--config", help="YAML scenario (or a previous manifest.json)")
    r.add_argument("--output-dir", required=True)
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--schemes", help=f"comma list from {','.join(SCHEMES)}")
    r.add_argument("--snr", help="comma list of SNR points in dB")
    r.add_argument("--workers", type=int, help="worker processes (default $IRSNOMA_WORKERS or 1)")

    c = sub.add_parser("config", help="print the resolved configuration as YAML")
    c.add_argument("--config")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.command == "run":
        return run(args)
    try:
        cfg = _resolve(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(emit_config(cfg))
    return 0


if __name__ == "__main__":
    sys.exit(main())
