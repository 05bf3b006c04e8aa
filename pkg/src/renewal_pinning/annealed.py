"""The annealed model: I(h), beta_0, the annealed critical curve and exponents."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._special import hurwitz_tail
from .homogeneous import loglog_slope, solve_free_energy
from .renewal_core import (
    Estimate,
    PowerLawRenewal,
    RenewalLaw,
    convolve_renewal,
    mass_function,
    normalize_power_law,
    tilt_law,
)
from .spectral import power_one_minus_cf, power_renewal_excess


class BoundaryRegime(ValueError):
    """Raised on parameter boundaries that carry logarithmic corrections."""


class HorizonError(RuntimeError):
    """Raised when a tabulation horizon is too short for the requested accuracy."""


def _untilted(law: PowerLawRenewal) -> PowerLawRenewal:
    if not isinstance(law, PowerLawRenewal):
        raise TypeError("the Fourier route needs zeta-normalized power laws")
    if law.tilt != 0.0:
        return PowerLawRenewal(law.exponent, law.prefactor, 0.0, law.horizon)
    return law


# ---------------------------------------------------------------------------
# Parseval route: sum_n u_h(n) u_hat(n) = (1/pi) int_0^pi Re[A_h(t) conj(B(t))] dt
# ---------------------------------------------------------------------------

_PANELS = 220
_NODES = 20


@lru_cache(maxsize=1)
def _graded_rule() -> tuple[np.ndarray, np.ndarray, float]:
    """Gauss-Legendre nodes on dyadic panels [pi 2^{-k-1}, pi 2^{-k}]."""
    x, w = np.polynomial.legendre.leggauss(_NODES)
    ts, ws = [], []
    for k in range(_PANELS):
        a = math.pi * 2.0 ** (-k - 1)
        b = 2.0 * a
        ts.append(0.5 * (b - a) * x + 0.5 * (b + a))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(ts), np.concatenate(ws), math.pi * 2.0 ** (-_PANELS)


class FourierPair:
    """Cached transforms for a (tau, tau_hat) pair of zeta-normalized power laws."""

    def __init__(self, base: PowerLawRenewal, disorder: PowerLawRenewal):
        self.base = _untilted(base)
        self.disorder = disorder
        if not isinstance(disorder, PowerLawRenewal) or disorder.tilt != 0.0:
            raise ValueError("disorder must be a recurrent power law")
        if disorder.exponent == 1.0:
            raise BoundaryRegime("alpha_hat = 1 is excluded")
        self.t, self.w, self.t_min = _graded_rule()
        self.omp = power_one_minus_cf(self.base, self.t)  # 1 - phi(t)
        self.finite_mean = disorder.exponent > 1.0
        if self.finite_mean:
            self.mu_hat = disorder.mean()
            self.B = power_renewal_excess(disorder, self.t)
        else:
            self.mu_hat = math.inf
            self.B = 1.0 / power_one_minus_cf(disorder, self.t)

    def _integrate(self, A: np.ndarray) -> float:
        f = np.real(A * np.conj(self.B))
        main = float(np.dot(self.w, f))
        # power-law remainder on (0, t_min) from the two innermost panels
        f1 = f[-_NODES:].mean()
        f2 = f[-2 * _NODES : -_NODES].mean()
        rem = 0.0
        if f1 != 0.0 and f2 != 0.0 and f1 * f2 > 0:
            p = math.log(abs(f1 / f2)) / math.log(0.5)
            if p > -1.0:
                rem = f1 * self.t_min / (p + 1.0) * 1.5 ** (-p)
        return (main + rem) / math.pi

    def I(self, h: float, damping: float = 0.0) -> float:
        """sum_n P_h(n in tau) e^{-damping n} P(n in tau_hat); +inf when divergent."""
        scale = math.exp(h)
        if damping == 0.0:
            d = -math.expm1(h)
            omp = d + scale * self.omp
        else:
            d = float(np.real(power_one_minus_cf(self.base, 0.0, damping, h)))
            omp = power_one_minus_cf(self.base, self.t, damping, h)
        if d < 0.0:
            return math.inf
        if d == 0.0:
            if self.finite_mean:
                return math.inf
            if self.base.exponent + self.disorder.exponent > 1.0:
                return math.inf
        A = 1.0 / omp
        val = self._integrate(A)
        if self.finite_mean:
            val += 1.0 / (self.mu_hat * d)
        return val


@lru_cache(maxsize=32)
def _pair(a: float, ca: float, ah: float, cah: float) -> FourierPair:
    return FourierPair(PowerLawRenewal(a, ca, 0.0, 2), PowerLawRenewal(ah, cah, 0.0, 2))


def fourier_pair(base: PowerLawRenewal, disorder: PowerLawRenewal) -> FourierPair:
    b = _untilted(base)
    return _pair(b.exponent, b.prefactor, disorder.exponent, disorder.prefactor)


# ---------------------------------------------------------------------------
# n-sum route with asymptotic tail
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DirectI:
    value: float
    head: float
    tail: float
    error: float


def compute_I_direct(base: PowerLawRenewal, disorder: PowerLawRenewal, h: float,
                     horizon: int | None = None) -> DirectI:
    """sum_{n <= N} P_h(n in tau) u_hat(n) plus the tail from the two mass-function asymptotes."""
    if h >= 0:
        raise ValueError("h must be negative")
    b = tilt_law(_untilted(base), h)
    N = min(b.horizon, disorder.horizon) if horizon is None else horizon
    uh = convolve_renewal(b.pmf, N)
    uhat = mass_function(disorder, N)
    g = uh * uhat.values
    head = math.fsum(g)
    d = b.defect
    amp = b.tail_coef / d**2  # u_h(n) ~ amp n^{-(1+a)}
    a = b.exponent
    if disorder.exponent > 1.0:
        tail = amp / disorder.mean() * hurwitz_tail(1.0 + a, N)
    else:
        ah = disorder.exponent
        ca = ah * math.sin(math.pi * ah) / math.pi / disorder.prefactor
        tail = amp * ca * hurwitz_tail(2.0 + a - ah, N)
    # relative mismatch of the asymptote at the edge of the table bounds the tail error
    asym_edge = amp * N ** (-(1.0 + a)) * float(uhat.asymptote(N))
    mismatch = abs(g[N] / asym_edge - 1.0)
    return DirectI(head + tail, head, tail, 2.0 * mismatch * tail)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


_DIRECT_BELOW = -20.0


def compute_I(base: PowerLawRenewal, disorder: PowerLawRenewal, h: float, rel_tol: float = 1e-10,
              method: str = "fourier") -> float:
    """I(h) = sum_n P_h(n in tau) P(n in tau_hat) for h < 0."""
    if h >= 0:
        raise ValueError("h must be negative; use compute_I_at_zero")
    if method == "direct":
        res = compute_I_direct(base, disorder, h)
        if res.error > rel_tol * res.value:
            raise HorizonError(f"tail bound {res.error:.3e} does not close below rel_tol")
        return res.value
    if h < _DIRECT_BELOW:
        # I - 1 is of order e^h here; the n-sum keeps it, the transform would not
        return compute_I_direct(base, disorder, h, horizon=min(512, base.horizon, disorder.horizon)).value
    return fourier_pair(base, disorder).I(h)


@dataclass(frozen=True)
class ZeroResult:
    status: str  # finite | divergent | boundary
    value: float


def compute_I_at_zero(base: PowerLawRenewal, disorder: PowerLawRenewal) -> ZeroResult:
    """Classify and evaluate sum_n u(n) u_hat(n).

    u(n) u_hat(n) decays like n^{(a ^ 1 - 1) + (ah ^ 1 - 1)}, so the sum diverges
    exactly when a + ah >= 1 with both below one, or when either exponent exceeds one.
    """
    a = _untilted(base).exponent
    ah = disorder.exponent
    if a >= 1.0 or ah >= 1.0:
        return ZeroResult("divergent", math.inf)
    s = a + ah
    if s == 1.0:
        return ZeroResult("boundary", math.nan)
    if s > 1.0:
        return ZeroResult("divergent", math.inf)
    return ZeroResult("finite", fourier_pair(base, disorder).I(0.0))


def p_of_h(I_value: float) -> float:
    """p(h) = 1 - 1/I(h)."""
    if I_value < 1.0:
        raise ValueError("I must be at least 1")
    if math.isinf(I_value):
        return 1.0
    return 1.0 - 1.0 / I_value


def beta_zero(base: PowerLawRenewal, disorder: PowerLawRenewal) -> float:
    """beta_0 = -log p(0)."""
    z = compute_I_at_zero(base, disorder)
    if z.status == "boundary":
        raise BoundaryRegime("alpha + alpha_hat = 1 is unclassified")
    if z.status == "divergent":
        return 0.0
    return -math.log(p_of_h(z.value))


def _target(beta: float) -> float:
    return 1.0 / -math.expm1(-beta)


def annealed_critical_point(base: PowerLawRenewal, disorder: PowerLawRenewal, beta: float,
                            tol: float = 1e-12, beta0: float | None = None) -> float:
    """h_c^a(beta) = I^{-1}(1/(1 - e^{-beta})) for beta > beta_0, else 0."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if beta == 0:
        return 0.0
    b0 = beta_zero(base, disorder) if beta0 is None else beta0
    if beta <= b0:
        return 0.0
    pair = fourier_pair(base, disorder)
    T = _target(beta)

    def resid(h):
        return pair.I(h) - T

    # bracket on a logarithmic ladder of negative h
    hi = None
    lo = None
    for e in np.arange(2.0, -300.0, -0.5):
        h = -(10.0**e)
        if resid(h) < 0:
            lo = h
        else:
            hi = h
            break
    if lo is None:
        raise HorizonError("I(h) exceeds the target on the whole ladder")
    if hi is None:
        raise HorizonError("target outside the numerical range of I")
    for _ in range(400):
        if lo / hi > 1.5:  # both negative, spans a wide ratio: geometric split
            mid = -math.sqrt(lo * hi)
        else:
            mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        r = resid(mid)
        if r < 0:
            lo = mid
        else:
            hi = mid
        if abs(r) <= tol * T and hi - lo <= 1e-15 * abs(lo):
            break
    return 0.5 * (lo + hi)


@dataclass
class AnnealedCurve:
    beta_grid: np.ndarray
    hca: np.ndarray
    beta0: float
    gamma_ann_fit: Estimate | None = None
    nu_a_fit: Estimate | None = None

    def concave(self, slack: float = 1e-9) -> bool:
        return concavity_check(self.beta_grid, self.hca, slack)


def concavity_check(x, y, slack: float = 1e-9) -> bool:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    for i in range(1, len(x) - 1):
        lam = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1])
        chord = (1 - lam) * y[i - 1] + lam * y[i + 1]
        if y[i] < chord - slack:
            return False
    return True


def annealed_curve(base, disorder, beta_grid) -> AnnealedCurve:
    b0 = beta_zero(base, disorder)
    grid = np.asarray(beta_grid, dtype=float)
    hca = np.array([annealed_critical_point(base, disorder, b, beta0=b0) for b in grid])
    return AnnealedCurve(grid, hca, b0)


# ---------------------------------------------------------------------------
# scaling exponents
# ---------------------------------------------------------------------------


def predicted_gamma_ann(alpha: float, alpha_hat: float) -> float:
    a1 = min(alpha, 1.0)
    if alpha + alpha_hat < 1.0:
        if abs((1.0 - alpha_hat) - 2.0 * alpha) < 1e-12:
            raise BoundaryRegime("log-corrected regime")
        return max(1.0, alpha / (1.0 - alpha - alpha_hat))
    if alpha + alpha_hat == 1.0 or alpha_hat == 1.0:
        raise BoundaryRegime("unclassified boundary")
    if alpha_hat > 1.0:
        if abs(alpha_hat - (1.0 + a1)) < 1e-12:
            raise BoundaryRegime("log-corrected regime")
        return 1.0 + min((alpha_hat - 1.0) / a1, 1.0)
    return a1 / (alpha_hat - 1.0 + a1)


def alpha_eff(alpha: float, alpha_hat: float) -> float:
    return alpha + max(1.0 - alpha_hat, 0.0)


def predicted_nu_a(alpha: float, alpha_hat: float, above_beta0: bool = True) -> float:
    if above_beta0:
        return max(1.0, 1.0 / alpha_eff(alpha, alpha_hat))
    return max(1.0, 1.0 / alpha)


@dataclass(frozen=True)
class GammaFit:
    exponent: float
    stderr: float
    predicted: float
    regime: str
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)


def gamma_ann_scaling_fit(base, disorder, beta_grid) -> GammaFit:
    """Fit the scaling exponent of the annealed critical curve near its onset."""
    a = _untilted(base).exponent
    ah = disorder.exponent
    pred = predicted_gamma_ann(a, ah)
    grid = np.asarray(beta_grid, dtype=float)
    if a + ah < 1.0:
        b0 = beta_zero(base, disorder)
        x = grid
        y = np.array([-annealed_critical_point(base, disorder, b0 + d, beta0=b0) for d in grid])
        regime = "beta0>0: -h_c^a vs beta-beta0"
    else:
        hs = np.array([annealed_critical_point(base, disorder, b, beta0=0.0) for b in grid])
        if ah > 1.0:
            mu = disorder.mean()
            y = -hs - grid / mu
            regime = "mu_hat<inf: -h_c^a - beta/mu_hat vs beta"
        else:
            y = -hs
            regime = "mu_hat=inf: -h_c^a vs beta"
        x = grid
    if np.any(y <= 0):
        raise HorizonError("non-positive scaling variable; grid too coarse or precision lost")
    est = loglog_slope(x, y)
    return GammaFit(est.value, est.stderr, pred, regime, x, y)


# ---------------------------------------------------------------------------
# intersection renewal
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntersectionLaw:
    base: RenewalLaw = field(repr=False)
    disorder: RenewalLaw = field(repr=False)
    first_passage: np.ndarray = field(repr=False)  # f(0..N), f(0) = 0
    beta_tilt: float
    law: RenewalLaw = field(repr=False)  # e^beta f with a power-law tail beyond N
    tail_exponent: float
    total: float  # sum_n K_tilde(n) including the tail


def first_passage(g: np.ndarray) -> np.ndarray:
    """f from g = u_h u_hat through g(n) = sum_{m=1}^n f(m) g(n-m)."""
    n_max = g.size - 1
    f = np.zeros(n_max + 1)
    for n in range(1, n_max + 1):
        f[n] = g[n] - np.dot(f[1:n], g[n - 1 : 0 : -1])
    return f


def _tail_fit(f: np.ndarray, a: float) -> tuple[float, float, float]:
    """Fit f(n) n^{1+a} = A + B n^{-q} through n = N/4, N/2, N."""
    N = f.size - 1
    ns = np.array([N // 4, N // 2, N])
    amps = f[ns] * ns.astype(float) ** (1.0 + a)
    d1 = amps[1] - amps[0]
    d2 = amps[2] - amps[1]
    if d1 != 0 and 0 < d2 / d1 < 1:
        r = d2 / d1
        q = -math.log2(r)
        B = d2 / (N ** (-q) - (N // 2) ** (-q))
        return float(amps[2] - B * N ** (-q)), float(B), q
    return float(amps[2]), 0.0, 0.0


_EXTEND = 16


def build_intersection_law(base_tilted: PowerLawRenewal, disorder: PowerLawRenewal, beta: float,
                           horizon: int | None = None, tol: float = 1e-6,
                           check: bool = False) -> IntersectionLaw:
    """K_tilde_beta(n) = e^beta P_h x P_hat((tau cap tau_hat)_1 = n) by first passage."""
    N = min(base_tilted.horizon, disorder.horizon) if horizon is None else horizon
    uh = convolve_renewal(base_tilted.pmf, N)
    uhat = convolve_renewal(disorder.pmf, N)
    f = first_passage(uh * uhat)
    a = base_tilted.tail_exponent + max(1.0 - disorder.exponent, 0.0)
    kt = math.exp(beta) * f
    amp, corr, q = _tail_fit(kt, a)
    # continue the table with the two-term fit, then a pure power tail of equal mass
    M = _EXTEND * N
    n = np.arange(N + 1, M + 1, dtype=float)
    ext = amp * n ** (-(1.0 + a)) + corr * n ** (-(1.0 + a + q))
    far = amp * hurwitz_tail(1.0 + a, M) + (corr * hurwitz_tail(1.0 + a + q, M) if corr else 0.0)
    pmf = np.concatenate((kt, ext))
    law = RenewalLaw(pmf, far, 0.0, a, far / hurwitz_tail(1.0 + a, M))
    total = law.finite_mass()
    law.defect = max(1.0 - total, 0.0)
    if check and abs(total - 1.0) > tol:
        raise HorizonError(f"normalization drift {total - 1.0:.3e} exceeds tol")
    return IntersectionLaw(base_tilted, disorder, f, beta, law, a, total)


# ---------------------------------------------------------------------------
# annealed free energy
# ---------------------------------------------------------------------------


def annealed_free_energy(base, disorder, beta: float, h: float, method: str = "fourier",
                         horizon: int | None = None) -> float:
    """F^a(beta, h): exponential growth rate of the annealed partition function."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    b = _untilted(base)
    F0 = solve_free_energy(b, h)
    if beta == 0:
        return F0
    if method == "intersection":
        if h > 0:
            raise ValueError("the intersection route needs h <= 0")
        inter = build_intersection_law(tilt_law(b, h), disorder, 0.0, horizon)
        fl = inter.law
        return solve_free_energy(fl, beta)
    pair = fourier_pair(b, disorder)
    T = _target(beta)
    x_lo = F0
    if x_lo == 0.0:
        if h < 0 and pair.I(h) <= T:
            return 0.0
        if h == 0.0:
            z = compute_I_at_zero(b, disorder)
            if z.status == "finite" and z.value <= T:
                return 0.0
    else:
        if pair.I(h, x_lo * (1 + 1e-12)) <= T:
            return x_lo
    # e^{beta delta_hat} <= e^beta, so F(0, h + beta) bounds F^a from above
    x_hi = solve_free_energy(b, h + beta) * (1.0 + 1e-12) + 1e-300
    if x_hi > 5.0:
        raise ValueError("damping beyond the range of the polylog expansion; use method='intersection'")
    lo, hi = x_lo, x_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        val = pair.I(h, mid) if mid > 0 else pair.I(h)
        if val > T:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def annealed_pinned_log_partition(base, disorder, beta: float, h: float, n: int) -> np.ndarray:
    """log Z^{a,c}_k for k = 0..n, pinned at k for both renewals.

    Writing e^{beta |tau cap tau_hat|} = prod (1 + z) with z = e^beta - 1 and
    expanding, Z^{a,c}_k = W(k) with W(0) = 1 and
    W(k) = sum_{m<k} W(m) z g(k-m), g = P_h(. in tau) P(. in tau_hat).
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if h > 0:
        raise ValueError("h must be non-positive")
    b = tilt_law(_untilted(base), h)
    uh = convolve_renewal(b.pmf, n)
    uhat = convolve_renewal(disorder.pmf, n)
    z = math.expm1(beta)
    logzg = np.log(z * uh * uhat)
    logw = np.full(n + 1, -np.inf)
    logw[0] = 0.0
    for k in range(1, n + 1):
        v = logw[:k] + logzg[k:0:-1]
        top = v.max()
        logw[k] = top + math.log(np.exp(v - top).sum())
    return logw


def annealed_dp_slope(base, disorder, beta: float, h: float, n: int = 2000) -> float:
    lz = annealed_pinned_log_partition(base, disorder, beta, h, n)
    m = n // 2
    return (lz[n] - lz[m]) / (n - m)


def nu_a_fit(base, disorder, beta: float, delta_grid=None) -> Estimate:
    """Slope of log F^a(beta, h_c^a + delta) against log delta.

    Corrections to the leading power die out slowly, hence the small default window.
    """
    if delta_grid is None:
        delta_grid = np.geomspace(1e-8, 1e-6, 9)
    hc = annealed_critical_point(base, disorder, beta)
    vals = [annealed_free_energy(base, disorder, beta, hc + d) for d in delta_grid]
    return loglog_slope(delta_grid, vals)


# ---------------------------------------------------------------------------
# large-beta relevance condition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RelevanceCheck:
    lhs: float
    rhs: float
    condition_value: float
    satisfied: bool


def large_beta_relevance_check(base: PowerLawRenewal, disorder: PowerLawRenewal,
                               horizon: int | None = None) -> RelevanceCheck:
    """Evaluate -log q > -(1/q) sum_n u_hat(n) K(n) log K(n), q = sum_n K(n) u_hat(n)."""
    if disorder.exponent <= 1.0:
        raise ValueError("requires mu_hat < inf")
    b = _untilted(base)
    N = min(b.horizon, disorder.horizon) if horizon is None else horizon
    uhat = convolve_renewal(disorder.pmf, N)
    K = b.pmf[: N + 1]
    mu = disorder.mean()
    with np.errstate(divide="ignore", invalid="ignore"):
        klogk = np.where(K > 0, K * np.log(np.where(K > 0, K, 1.0)), 0.0)
    q = math.fsum(K * uhat) + b.tail_coef * hurwitz_tail(1.0 + b.exponent, N) / mu
    s = 1.0 + b.exponent
    M = N + 0.5
    # sum_{n>N} n^{-s} log n, midpoint integral
    tail_log = M ** (1.0 - s) * (math.log(M) / (s - 1.0) + 1.0 / (s - 1.0) ** 2)
    tail_klogk = b.tail_coef * (math.log(b.tail_coef) * hurwitz_tail(s, N) - s * tail_log)
    S = math.fsum(klogk * uhat) + tail_klogk / mu
    lhs = -math.log(q)
    rhs = -S / q
    return RelevanceCheck(lhs, rhs, lhs - rhs, lhs > rhs)
