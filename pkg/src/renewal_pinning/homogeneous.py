"""Homogeneous pinning: free energy, contact fraction, exponent fits, entropy rate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .renewal_core import Estimate, RenewalLaw


def critical_reward(law: RenewalLaw) -> float:
    """h_crit = -log sum_n K(n); zero for recurrent laws."""
    if law.defect == 0.0:
        return 0.0
    return -math.log1p(-law.defect)


def _bisect_adjacent(fun, lo: float, hi: float, rel_tol: float, max_iter: int = 2000) -> float:
    """Root of an increasing function by bisection down to adjacent doubles."""
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        val = fun(mid)
        if val == 0.0:
            return mid
        if val > 0.0:
            hi = mid
        else:
            lo = mid
        if rel_tol > 0 and hi - lo <= rel_tol * lo:
            break
    return 0.5 * (lo + hi)


def solve_free_energy(law: RenewalLaw, h: float, tol: float = 0.0) -> float:
    """F(h): the x >= 0 solving sum_n K(n) e^{-n x} = e^{-h}, or 0 below h_crit.

    ``tol`` is a relative tolerance on the root; the default 0 bisects down
    to adjacent doubles.
    """
    if h <= critical_reward(law):
        return 0.0
    # sum K (1 - e^{-nx}) = finite_mass - e^{-h}, with the right side written stably
    target = -math.expm1(-h) - law.defect
    if target <= 0.0:
        return 0.0
    return _bisect_adjacent(lambda x: law.laplace_deficit(x) - target, 0.0, h + 1.0, tol)


def free_energy_derivative(law: RenewalLaw, h: float, F: float | None = None) -> float:
    """Contact fraction F'(h) = e^{-h} / sum_n n K(n) e^{-n F(h)}."""
    if F is None:
        F = solve_free_energy(law, h)
    if F == 0.0:
        return 0.0
    return math.exp(-h) / law.laplace_first(F)


@dataclass
class FreeEnergyCurve:
    law: RenewalLaw = field(repr=False)
    samples: list[tuple[float, float]]
    derivative_samples: list[tuple[float, float]]

    def to_csv_rows(self) -> list[str]:
        rows = ["h,F,Fprime"]
        for (h, f), (_, d) in zip(self.samples, self.derivative_samples):
            rows.append(f"{h!r},{f!r},{d!r}")
        return rows


def free_energy_curve(law: RenewalLaw, h_values: Iterable[float]) -> FreeEnergyCurve:
    samples, deriv = [], []
    for h in h_values:
        h = float(h)
        F = solve_free_energy(law, h)
        samples.append((h, F))
        deriv.append((h, free_energy_derivative(law, h, F)))
    return FreeEnergyCurve(law, samples, deriv)


def loglog_slope(x, y) -> Estimate:
    """Least-squares slope of log y against log x with its standard error."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    n = lx.size
    resid = ly - A @ coef
    s2 = float(resid @ resid) / max(n - 2, 1)
    sxx = float(((lx - lx.mean()) ** 2).sum())
    return Estimate(float(coef[0]), math.sqrt(s2 / sxx) if sxx > 0 else math.inf)


def critical_exponent_fit(curve: FreeEnergyCurve, h_range: tuple[float, float]) -> Estimate:
    """Slope of log F against log h over the samples inside ``h_range``."""
    lo, hi = h_range
    if not 0 < lo < hi <= 1:
        raise ValueError("need 0 < lo < hi <= 1")
    pts = [(h, f) for h, f in curve.samples if lo <= h <= hi and f > 0]
    if len(pts) < 8:
        raise ValueError("at least 8 sample points are needed")
    h, f = zip(*pts)
    return loglog_slope(h, f)


def fit_homogeneous_exponent(law: RenewalLaw, h_range=(1e-5, 1e-3), points: int = 12) -> Estimate:
    hs = np.geomspace(h_range[0], h_range[1], points)
    return critical_exponent_fit(free_energy_curve(law, hs), h_range)


# ---------------------------------------------------------------------------
# expansion near h = 0 for finite-mean laws
# ---------------------------------------------------------------------------


def _expansion_constant(alpha: float) -> float:
    """int_0^inf (e^{-t} - 1 + t) t^{-(1+alpha)} dt = Gamma(-alpha) for 1 < alpha < 2."""
    return math.gamma(-alpha)


@dataclass(frozen=True)
class ExpansionReport:
    h: float
    excess: float  # F(h) - h/mu
    leading: float
    ratio: float
    regime: str


def free_energy_expansion_check(law: RenewalLaw, h: float) -> ExpansionReport:
    """Compare F(h) - h/mu with the leading correction term for exponent > 1."""
    a = getattr(law, "exponent", law.tail_exponent)
    if a is None or a <= 1.0:
        raise ValueError("requires exponent > 1")
    if not 0 <= h <= 0.05:
        raise ValueError("h must lie in [0, 0.05]")
    mu = law.mean()
    if h == 0:
        return ExpansionReport(0.0, 0.0, 0.0, 1.0, "trivial")
    F = solve_free_energy(law, h)
    excess = F - h / mu
    if a > 2:
        lead = h * h * law.variance() / (2.0 * mu**3)
        regime = "alpha>2"
    elif a < 2:
        c = law.tail_coef * _expansion_constant(a)
        lead = c * h**a / mu ** (a + 1.0)
        regime = "1<alpha<2"
    else:
        raise ValueError("alpha = 2 carries a logarithmic correction")
    return ExpansionReport(h, excess, lead, excess / lead, regime)


# ---------------------------------------------------------------------------
# entropy rate of tilted disorder measures
# ---------------------------------------------------------------------------


def entropy_rate(law: RenewalLaw, theta: float) -> float:
    """h_inf(theta) = theta F'(theta) - F(theta), F' by a centered difference."""
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if theta == 0:
        return 0.0
    step = max(1e-6, theta / 100.0)
    fp = (solve_free_energy(law, theta + step) - solve_free_energy(law, theta - step)) / (2 * step)
    return max(theta * fp - solve_free_energy(law, theta), 0.0)


def homogeneous_pinned_log_partition(law: RenewalLaw, h: float, n: int) -> np.ndarray:
    """log Z^c_{n,h} = log sum over renewals hitting n of e^{h |tau cap [1,n]|} prod K, for 0..n."""
    if n > law.horizon:
        raise ValueError("n beyond horizon")
    logK = np.full(n + 1, -np.inf)
    with np.errstate(divide="ignore"):
        logK[1:] = np.log(law.pmf[1 : n + 1])
    logz = np.full(n + 1, -np.inf)
    logz[0] = 0.0
    for m in range(1, n + 1):
        v = logz[:m] + logK[m:0:-1]
        top = v.max()
        logz[m] = top + math.log(np.exp(v - top).sum()) + h
    return logz
