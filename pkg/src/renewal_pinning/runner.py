"""Experiment runners behind the command line: each returns CSV rows and a results dict."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from .annealed import (
    BoundaryRegime,
    HorizonError,
    annealed_critical_point,
    annealed_free_energy,
    beta_zero,
    concavity_check,
    gamma_ann_scaling_fit,
    predicted_nu_a,
)
from .config import ExperimentConfig
from .moments_gaps import boundedness_probe, second_moment_dp
from .quenched import CSV_HEADER as QUENCHED_HEADER
from .quenched import quenched_free_energy_grid
from .renewal_core import normalize_power_law, tilt_law
from .spectral import mass_by_convolution, mass_by_inversion

SCHEMAS = {
    "annealed-curve": "beta,h_c_a,beta0,regime",
    "phase-portrait": "alpha,alpha_hat,classification,conjectured",
    "quenched-mc": QUENCHED_HEADER,
    "second-moment": "n,beta,first_moment,second_moment",
    "spectral-check": "n,u_convolution,u_inversion,abs_diff",
}
EVIDENCE_COLUMNS = "second_moment_growth,nu_a_predicted"
DEFAULT_FIT_GRID = tuple(float(x) for x in np.geomspace(1e-4, 1e-2, 10))


@dataclass
class RunResult:
    header: str
    rows: list[str]
    results: dict[str, Any] = field(default_factory=dict)

    def csv_text(self) -> str:
        return "\n".join([self.header, *self.rows]) + "\n"


def fmt(x: float) -> str:
    """Shortest round-trip text of a float."""
    return repr(float(x))


def parallel_map(fn: Callable, items: Iterable, threads: int) -> list:
    """Map in input order; scheduling never affects the result order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _finite(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


# ---------------------------------------------------------------------------
# annealed curve
# ---------------------------------------------------------------------------


def run_annealed_curve(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    a, ah = cfg["alpha"], cfg["alpha_hat"]
    base = normalize_power_law(a, cfg["horizon"])
    disorder = normalize_power_law(ah, cfg["horizon"])
    b0 = beta_zero(base, disorder)
    betas = sorted(set(cfg["beta_grid"].values))
    if any(b < 0 for b in betas):
        raise ValueError("beta must be non-negative")
    tol = cfg["tol"]
    hca = parallel_map(lambda b: annealed_critical_point(base, disorder, b, tol=tol, beta0=b0),
                       betas, threads)
    rows = [f"{fmt(b)},{fmt(h)},{fmt(b0)},{'beta<=beta0' if b <= b0 else 'beta>beta0'}"
            for b, h in zip(betas, hca)]
    above = [(b, h) for b, h in zip(betas, hca) if b > b0]
    results: dict[str, Any] = {
        "alpha": a,
        "alpha_hat": ah,
        "beta0": b0,
        "concave": concavity_check(betas, hca),
        "flat_up_to_beta0": all(h == 0.0 for b, h in zip(betas, hca) if b <= b0),
        "strictly_decreasing_after_beta0": all(y[1] < x[1] for x, y in zip(above, above[1:])),
    }
    if math.isfinite(disorder.mean()):
        mu = disorder.mean()
        results["below_minus_beta_over_mu_hat"] = all(h <= -b / mu + 1e-12 for b, h in zip(betas, hca))
    fit_grid = cfg.get("fit_grid")
    grid = fit_grid.values if fit_grid is not None else DEFAULT_FIT_GRID
    try:
        fit = gamma_ann_scaling_fit(base, disorder, grid)
    except BoundaryRegime:
        results["gamma_ann"] = {"status": "log-corrected, not fitted"}
    except HorizonError as exc:
        results["gamma_ann"] = {"status": f"not fitted: {exc}"}
    else:
        results["gamma_ann"] = {
            "status": "fitted",
            "exponent": fit.exponent,
            "stderr": fit.stderr,
            "ci95": [fit.exponent - 1.96 * fit.stderr, fit.exponent + 1.96 * fit.stderr],
            "predicted": fit.predicted,
            "regime": fit.regime,
        }
    return RunResult(SCHEMAS["annealed-curve"], rows, results)


# ---------------------------------------------------------------------------
# phase portrait
# ---------------------------------------------------------------------------

_EPS = 1e-12


def classify_cell(alpha: float, alpha_hat: float) -> str:
    """Classification of (alpha, alpha_hat) implied by proven statements only.

    Returns relevant, trivially-relevant, irrelevant, unknown or boundary.
    """
    a, ah = alpha, alpha_hat
    if not (a > 0 and ah > 0):
        raise ValueError("exponents must be positive")
    if abs(ah - 1.0) < _EPS or abs(ah - 2.0) < _EPS:
        return "boundary"
    if ah > 2.0:
        if abs(a - 0.5) < _EPS:
            return "boundary"
        return "relevant" if a > 0.5 else "irrelevant"
    if ah > 1.0:
        if abs(a - 1.0 / ah) < _EPS:
            return "boundary"
        return "relevant" if a > 1.0 / ah else "unknown"
    if abs(a + ah - 1.0) < _EPS:
        return "boundary"
    return "trivially-relevant" if a + ah > 1.0 else "irrelevant"


def conjectured_cell(alpha: float, alpha_hat: float) -> str:
    """The chaos-expansion conjecture alpha > 1 - 1/min(alpha_hat, 2), stated for alpha_hat > 1."""
    if alpha_hat <= 1.0:
        return "n/a"
    edge = 1.0 - 1.0 / min(alpha_hat, 2.0)
    if abs(alpha - edge) < _EPS:
        return "boundary"
    return "relevant" if alpha > edge else "irrelevant"


def _evidence(cell, beta: float, n: int) -> tuple[float, float]:
    a, ah = cell
    base = normalize_power_law(a, n + 1)
    disorder = normalize_power_law(ah, n + 1)
    h = annealed_critical_point(base, disorder, beta)
    law = tilt_law(base, h)
    second = second_moment_dp(law, disorder, beta, n, all_n=True)
    growth = float(second[n] / second[n // 2] - 1.0)
    return growth, predicted_nu_a(a, ah, beta > beta_zero(base, disorder))


def run_phase_portrait(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    alphas = sorted(set(cfg["alpha_grid"].values))
    alpha_hats = sorted(set(cfg["alpha_hat_grid"].values))
    if min(alphas) <= 0 or max(alphas) > 2 or min(alpha_hats) <= 0 or max(alpha_hats) > 3:
        raise ValueError("the grid must lie in (0, 2] x (0, 3]")
    cells = list(itertools.product(alphas, alpha_hats))
    evidence = cfg.get("evidence", False)
    header = SCHEMAS["phase-portrait"] + ("," + EVIDENCE_COLUMNS if evidence else "")
    extra = (parallel_map(lambda c: _evidence(c, cfg["beta"], cfg["n"]), cells, threads)
             if evidence else [None] * len(cells))
    rows = []
    counts: dict[str, int] = {}
    for (a, ah), ev in zip(cells, extra):
        cls = classify_cell(a, ah)
        counts[cls] = counts.get(cls, 0) + 1
        row = f"{fmt(a)},{fmt(ah)},{cls},{conjectured_cell(a, ah)}"
        if ev is not None:
            row += f",{fmt(ev[0])},{fmt(ev[1])}"
        rows.append(row)
    return RunResult(header, rows, {"cells": len(cells), "counts": dict(sorted(counts.items()))})


# ---------------------------------------------------------------------------
# quenched Monte Carlo
# ---------------------------------------------------------------------------


def run_quenched_mc(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    a, ah, n = cfg["alpha"], cfg["alpha_hat"], cfg["n"]
    horizon = max(cfg.get("horizon", n), n)
    law = normalize_power_law(a, horizon)
    disorder = normalize_power_law(ah, horizon)
    params = sorted(itertools.product(set(cfg["beta_grid"].values), set(cfg["h_grid"].values)))
    est = quenched_free_energy_grid(law, disorder, params, n, cfg["replicas"], cfg.seed, threads)
    rows = [e.csv_row() for e in est]
    points = []
    for e in est:
        try:
            fa = annealed_free_energy(law, disorder, e.beta, e.h)
        except ValueError:
            fa = math.nan
        points.append({
            "beta": e.beta,
            "h": e.h,
            "half_n_value": e.half_value,
            "annealed_free_energy": _finite(fa),
            "jensen_ok": bool(e.value <= fa + 2.0 * e.stderr) if math.isfinite(fa) else None,
        })
    return RunResult(SCHEMAS["quenched-mc"], rows, {"points": points})


# ---------------------------------------------------------------------------
# second moment
# ---------------------------------------------------------------------------


def run_second_moment(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    a, ah = cfg["alpha"], cfg["alpha_hat"]
    n_grid = sorted(set(cfg["n_grid"].as_ints()))
    horizon = max(cfg["horizon"], n_grid[-1])
    base = normalize_power_law(a, horizon)
    disorder = normalize_power_law(ah, horizon)
    betas = sorted(set(cfg["beta_grid"].values))
    reports = parallel_map(lambda b: boundedness_probe(base, disorder, b, n_grid), betas, threads)
    rows = []
    summary = []
    for rep in reports:
        for n, f, s in zip(rep.n_grid, rep.first, rep.second):
            rows.append(f"{n},{fmt(rep.beta)},{fmt(f)},{fmt(s)}")
        summary.append({
            "beta": rep.beta,
            "h_c_a": rep.h,
            "first_moment_max": rep.first_max,
            "first_moment_at_most_2": rep.first_bounded,
            "second_moment_growth": rep.window_growth,
            "flat": rep.flat,
        })
    return RunResult(SCHEMAS["second-moment"], rows, {"betas": summary})


# ---------------------------------------------------------------------------
# spectral cross-check
# ---------------------------------------------------------------------------


def run_spectral_check(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    a, theta, n = cfg["alpha"], cfg["theta"], cfg["n"]
    support = max(cfg["horizon"], n)
    law = normalize_power_law(a, support)
    conv = mass_by_convolution(law, n, theta)
    inv = mass_by_inversion(law, np.arange(n + 1), theta, support=support)
    diff = np.abs(conv - inv)
    rows = [f"{k},{fmt(conv[k])},{fmt(inv[k])},{fmt(diff[k])}" for k in range(n + 1)]
    worst = float(diff.max())
    return RunResult(SCHEMAS["spectral-check"], rows,
                     {"max_abs_diff": worst, "within_1e-8": worst < 1e-8})


RUNNERS = {
    "annealed-curve": run_annealed_curve,
    "phase-portrait": run_phase_portrait,
    "quenched-mc": run_quenched_mc,
    "second-moment": run_second_moment,
    "spectral-check": run_spectral_check,
}

__all__ = [
    "RUNNERS", "RunResult", "SCHEMAS", "classify_cell", "conjectured_cell", "fmt", "parallel_map",
]
