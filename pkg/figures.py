"""figures.py — data sweeps behind the reference curves.

Each sweep returns a long-format DataFrame with the fixed columns

    x, value, model

plus a dict of fit results. `write_figure` stores the CSV and a sibling
`<name>.fit.json` atomically. Figures:

  fig2  Δ_L vs L (equal spacing, exact)          fit ln Δ_L = a L + b
  fig3  f(L) vs L                                fit ln f   = a L + b
  fig4  optimised Δ_total vs M, n = 1            power fit + 1/√M baseline
  fig5  optimised L vs M, n = 1                  fit L = a ln M + b
  fig6  optimised Δ_total vs M, n = 1..4         power fit per n
  fig7  optimised L vs M, n = 1..4               linear fit per n
"""

from __future__ import annotations

import json
import logging
import math
from typing import Any, Dict, List, Sequence, Tuple

import pandas as pd

from decoy_core import EXACT, equal_spacing_schedule, interval_delta, lambda_coefficients
from decoy_errors import ConfigError, DegenerateFit, InfeasibleSweep, NoFeasibleL
from error_budget import (
    FITTED_DELTA,
    FITTED_F,
    FitResult,
    TermModel,
    f_factor,
    linear_fit,
    log_spaced_budgets,
    optimize_probe_count,
    power_fit,
)
from gain_records import write_atomic

log = logging.getLogger("figures")

CSV_COLUMNS = ["x", "value", "model"]
CSV_VERSION = 1
FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7")


def _frame(rows: List[Tuple[float, float, str]]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def _fit_or_infeasible(fn, points, what: str) -> FitResult:
    try:
        return fn(points)
    except DegenerateFit:
        raise InfeasibleSweep(f"sweep for {what} has fewer than two usable points", points=len(points))


def fig2(L_values: Sequence[int] = range(1, 11)) -> Tuple[pd.DataFrame, Dict[str, FitResult]]:
    rows, pts = [], []
    for L in L_values:
        d = float(interval_delta(equal_spacing_schedule(L), EXACT))
        rows.append((L, d, "exact"))
        rows.append((L, math.exp(FITTED_DELTA.slope * L + FITTED_DELTA.intercept), "fitted"))
        pts.append((L, math.log(d)))
    return _frame(rows), {"delta": _fit_or_infeasible(linear_fit, pts, "fig2")}


def fig3(L_values: Sequence[int] = range(1, 11)) -> Tuple[pd.DataFrame, Dict[str, FitResult]]:
    rows, pts = [], []
    for L in L_values:
        f = f_factor(lambda_coefficients(equal_spacing_schedule(L), EXACT))
        rows.append((L, f, "exact"))
        rows.append((L, math.exp(FITTED_F.slope * L + FITTED_F.intercept), "fitted"))
        pts.append((L, math.log(f)))
    return _frame(rows), {"f": _fit_or_infeasible(linear_fit, pts, "fig3")}


def _optimum_sweep(
    M_values: Sequence[float],
    n: int,
    delta_model: TermModel,
    f_model: TermModel,
    L_max: int,
) -> List[Tuple[float, int, float]]:
    out = []
    for M in M_values:
        try:
            L, b = optimize_probe_count(M, n, delta_model, f_model, L_max)
        except NoFeasibleL:
            continue
        out.append((M, L, b.delta_total))
    return out


def _multi_mode(
    kind: str,
    n_values: Sequence[int],
    M_values: Sequence[float],
    delta_model: TermModel,
    f_model: TermModel,
    L_max: int,
) -> Tuple[pd.DataFrame, Dict[str, FitResult]]:
    rows: List[Tuple[float, float, str]] = []
    fits: Dict[str, FitResult] = {}
    for n in n_values:
        sweep = _optimum_sweep(M_values, n, delta_model, f_model, L_max)
        label = f"n={n}"
        if kind == "total":
            rows += [(M, total, label) for M, _, total in sweep]
            fits[label] = _fit_or_infeasible(power_fit, [(M, t) for M, _, t in sweep], label)
        else:
            rows += [(M, float(L), label) for M, L, _ in sweep]
            fits[label] = _fit_or_infeasible(linear_fit, [(math.log(M), L) for M, L, _ in sweep], label)
    if kind == "total":
        rows += [(M, 1.0 / math.sqrt(M), "single_photon_baseline") for M in M_values]
    log.info("%s sweep: %d budgets x %d mode counts", kind, len(M_values), len(n_values))
    return _frame(rows), fits


def reproduce(
    figure: str,
    M_lo: float = 1e3,
    M_hi: float = 1e12,
    points: int = 40,
    L_max: int = 20,
    n_values: Sequence[int] = (1, 2, 3, 4),
    delta_model: TermModel = FITTED_DELTA,
    f_model: TermModel = FITTED_F,
) -> Tuple[pd.DataFrame, Dict[str, FitResult]]:
    name = str(figure).lower()
    if name not in FIGURES:
        raise ConfigError(f"unknown figure {figure!r}", allowed=list(FIGURES))
    if name == "fig2":
        return fig2()
    if name == "fig3":
        return fig3()
    if not (0 < M_lo <= M_hi) or points < 2:
        raise InfeasibleSweep("budget sweep needs 0 < M_lo <= M_hi and at least two points",
                              M_lo=M_lo, M_hi=M_hi, points=points)
    Ms = log_spaced_budgets(M_lo, M_hi, points)
    modes = (1,) if name in ("fig4", "fig5") else tuple(n_values)
    kind = "total" if name in ("fig4", "fig6") else "probes"
    df, fits = _multi_mode(kind, modes, Ms, delta_model, f_model, L_max)
    if name == "fig4":
        fits = {"total": fits["n=1"]}
    elif name == "fig5":
        fits = {"probes": fits["n=1"]}
    return df, fits


def fit_document(figure: str, fits: Dict[str, FitResult]) -> Dict[str, Any]:
    x_name = "L" if figure in ("fig2", "fig3") else "M"
    doc: Dict[str, Any] = {"figure": figure, "csv_version": CSV_VERSION, "x": x_name, "fits": {}}
    for key, fit in fits.items():
        entry = {"slope": fit.slope, "intercept": fit.intercept, "residual_rms": fit.residual_rms,
                 "points": len(fit.points)}
        if fit.exponent is not None:
            entry.update(prefactor=fit.prefactor, exponent=fit.exponent)
        doc["fits"][key] = entry
    return doc


def fit_path_for(csv_path: str) -> str:
    base = csv_path[:-4] if csv_path.lower().endswith(".csv") else csv_path
    return base + ".fit.json"


def write_figure(figure: str, df: pd.DataFrame, fits: Dict[str, FitResult], csv_path: str) -> str:
    write_atomic(csv_path, df.to_csv(index=False, float_format="%.12g"))
    fit_path = fit_path_for(csv_path)
    write_atomic(fit_path, json.dumps(fit_document(figure, fits), indent=2, sort_keys=True) + "\n")
    return fit_path
