"""decoy_cli.py — batch front-end.

Subcommands:
  coeffs     λ_0..λ_L, Δ_L and f(L) for a schedule (CSV: name,value)
  estimate   Y1 (or Y_11..1) estimate + error budget from a gain file or a simulation (JSON)
  simulate   write a gain file from a channel model
  optimize   optimal probe count for a pulse budget (JSON, or CSV with --sweep)
  reproduce  figure data: CSV (x,value,model) + <output>.fit.json

Exit codes: 0 ok, 2 config, 3 missing data, 4 infeasible sweep, 5 numeric limit.
Errors are printed to stderr as one JSON object.

Examples:
  python decoy_cli.py coeffs --L 2
  python decoy_cli.py simulate --config run.json --seed 7 --output gains.json
  python decoy_cli.py estimate --config run.json --gains gains.json
  python decoy_cli.py reproduce fig4 --output fig4.csv
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

import pandas as pd

from channel_sim import run_experiment
from config import get_policy
from config_doctor import emit_once
from decoy_core import (
    EXACT,
    as_decimal_string,
    interval_delta,
    lambda_coefficients,
    multimode_estimate,
)
from decoy_errors import ConfigError, DecoyError
from error_budget import budget_table, f_factor, log_spaced_budgets, optimize_probe_count, total_error
from experiment_config import ExperimentConfig, load_experiment_config
from figures import FIGURES, reproduce, write_figure
from gain_records import GainRecord, dump_gain_record, load_gain_record, write_atomic

log = logging.getLogger("decoy_cli")


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        write_atomic(output, text)
        log.info("wrote %s", output)
    else:
        sys.stdout.write(text)


def _json(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_coeffs(cfg: ExperimentConfig) -> str:
    sched = cfg.resolve_schedule()
    coeffs = lambda_coefficients(sched, cfg.arithmetic_mode)
    delta = interval_delta(sched, cfg.arithmetic_mode)
    rows = [(f"lambda_{j}", as_decimal_string(x, cfg.digits)) for j, x in enumerate(coeffs.lambdas)]
    rows.append(("delta", as_decimal_string(delta, cfg.digits)))
    rows.append(("f", as_decimal_string(f_factor(coeffs), min(cfg.digits, 17))))
    return pd.DataFrame(rows, columns=["name", "value"]).to_csv(index=False)


def _gain_record(cfg: ExperimentConfig) -> GainRecord:
    if cfg.gains_file:
        return load_gain_record(cfg.gains_file)
    pulses = None if cfg.exact_gains else cfg.pulses
    budget = None if cfg.exact_gains else cfg.budget
    return run_experiment(
        cfg.resolve_schedule(), cfg.yield_model(), pulses, cfg.seed,
        source=cfg.source_for(), total_pulses=budget, workers=cfg.workers,
    )


def cmd_estimate(cfg: ExperimentConfig) -> str:
    sched = cfg.resolve_schedule()
    record = _gain_record(cfg)
    n = record.mode_count
    rep = multimode_estimate(record, sched, n, cfg.arithmetic_mode)
    sampled = [e.pulses for e in record if e.pulses is not None]
    M = sum(sampled) + record.discarded_pulses if sampled else None
    # exact terms of the estimated schedule unless the config picks fitted ones
    budget = total_error(
        sched.L, n, M, cfg.term_model("delta", default="exact"), cfg.term_model("f", default="exact"),
        tight=cfg.tight and bool(sampled), record=record, schedule=sched,
    )
    doc: Dict[str, Any] = {"estimate": rep.to_dict(cfg.digits), "budget": budget.to_dict()}
    if record.discarded_pulses:
        doc["discarded_pulses"] = record.discarded_pulses
    return _json(doc)


def cmd_simulate(cfg: ExperimentConfig) -> GainRecord:
    return _gain_record(cfg)


def cmd_optimize(cfg: ExperimentConfig, sweep: bool = False) -> str:
    delta_model, f_model = cfg.term_model("delta"), cfg.term_model("f")
    if sweep:
        Ms = log_spaced_budgets(cfg.M_lo, cfg.M_hi, cfg.points)
        return budget_table(Ms, cfg.n_values, delta_model, f_model, cfg.L_max).to_csv(index=False, float_format="%.12g")
    if cfg.budget is None:
        raise ConfigError("optimize needs a pulse budget (--budget or 'budget')")
    L, b = optimize_probe_count(cfg.budget, cfg.modes, delta_model, f_model, cfg.L_max)
    return _json({"L_opt": L, "budget": b.to_dict()})


def cmd_reproduce(cfg: ExperimentConfig, figure: str) -> str:
    df, fits = reproduce(figure, cfg.M_lo, cfg.M_hi, cfg.points, cfg.L_max, cfg.n_values,
                         cfg.term_model("delta"), cfg.term_model("f"))
    out = cfg.output or f"{figure}.csv"
    fit_path = write_figure(figure, df, fits, out)
    return f"{out}\n{fit_path}\n"


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON")
    common.add_argument("--output", help="output file (default: stdout)")
    common.add_argument("--seed", type=int)
    common.add_argument("--exact", action="store_true", help="exact rational arithmetic")
    common.add_argument("--digits", type=int)
    common.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    common.add_argument("--L", type=int, help="equal spacing with L probes")
    common.add_argument("--schedule", help="comma-separated intensities")
    common.add_argument("--modes", type=int)
    common.add_argument("--pulses", type=int, help="pulses per setting")
    common.add_argument("--budget", type=int, help="total pulse budget M")
    common.add_argument("--workers", type=int)

    ap = argparse.ArgumentParser(prog="decoy_cli", description="Decoy-method yield estimation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("coeffs", parents=[common])
    est = sub.add_parser("estimate", parents=[common])
    est.add_argument("--gains", help="gain file (JSON array)")
    sub.add_parser("simulate", parents=[common])
    opt = sub.add_parser("optimize", parents=[common])
    opt.add_argument("--sweep", action="store_true", help="budget table over M_lo..M_hi")
    rep = sub.add_parser("reproduce", parents=[common])
    rep.add_argument("figure", choices=list(FIGURES))
    return ap


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    schedule: Optional[List[float]] = None
    if args.schedule:
        try:
            schedule = [float(x) for x in args.schedule.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"--schedule must be comma-separated numbers, got {args.schedule!r}")
    return {
        "output": args.output,
        "seed": args.seed,
        "arithmetic_mode": EXACT if args.exact else None,
        "digits": args.digits,
        "L": args.L,
        "schedule": schedule,
        "modes": args.modes,
        "pulses": args.pulses,
        "budget": args.budget,
        "workers": args.workers,
        "gains_file": getattr(args, "gains", None),
        "figure": getattr(args, "figure", None),
    }


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, get_policy().log_level, logging.INFO),
        format="[decoy] %(levelname)s %(asctime)s %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_experiment_config(args.config, _overrides(args))
        if args.print_config:
            sys.stdout.write(_json(cfg.to_dict()))
            return 0
        emit_once(cfg)
        if args.command == "coeffs":
            _emit(cmd_coeffs(cfg), cfg.output)
        elif args.command == "estimate":
            _emit(cmd_estimate(cfg), cfg.output)
        elif args.command == "simulate":
            record = cmd_simulate(cfg)
            if cfg.output:
                dump_gain_record(record, cfg.output)
            else:
                sys.stdout.write(json.dumps(record.to_list(), indent=2) + "\n")
        elif args.command == "optimize":
            _emit(cmd_optimize(cfg, args.sweep), cfg.output)
        else:
            sys.stdout.write(cmd_reproduce(cfg, args.figure))
        return 0
    except DecoyError as e:
        sys.stderr.write(json.dumps(e.to_dict(), sort_keys=True, default=str) + "\n")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
