"""Characteristic functions of inter-arrival laws and Fourier inversion of u(n)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._special import _poly_coeffs, polylog_exp
from .homogeneous import loglog_slope, solve_free_energy
from .renewal_core import PowerLawRenewal, RenewalLaw, convolve_renewal


# ---------------------------------------------------------------------------
# exact characteristic functions
# ---------------------------------------------------------------------------


def power_one_minus_cf(law: PowerLawRenewal, t, damping: float = 0.0, theta: float = 0.0) -> np.ndarray:
    """1 - E(e^{(it - damping) tau_1}) for the full (untruncated) power law.

    The law may carry a tilt; ``theta`` multiplies every K(n) by e^theta on top
    of the damping, which is how the tilted recurrent laws
    K_theta(n) = e^{theta - F(theta) n} K(n) are expressed.
    """
    t = np.asarray(t, dtype=float)
    mu = -damping + 1j * t
    scale = math.exp(law.tilt + theta)
    # 1 - scale c Li(e^mu) = (1 - scale) + scale (1 - c Li(e^mu))
    core = -law.prefactor * polylog_exp(1.0 + law.exponent, mu, drop_constant=True)
    return (1.0 - scale) + scale * core


def power_renewal_excess(law: PowerLawRenewal, t) -> np.ndarray:
    """sum_{n >= 0} (u(n) - 1/mu) e^{int} = 1/(1 - phi) - (1/mu)/(1 - e^{it}), finite mean.

    The numerator mu (1 - e^{it}) - (1 - phi) is summed with its order-t terms
    cancelled analytically.
    """
    if law.tilt != 0.0 or law.exponent <= 1.0:
        raise ValueError("needs a recurrent law with exponent > 1")
    t = np.asarray(t, dtype=float)
    s = 1.0 + law.exponent
    c = law.prefactor
    mean = law.mean()
    coef, special = _poly_coeffs(s)
    z = 1j * t
    # numerator = c [Gamma(-a)(-z)^a or log part] + sum_{k>=2} (c zeta(s-k) - mean) z^k / k!
    acc = np.zeros_like(z)
    lfact = np.cumsum(np.log(np.maximum(np.arange(coef.size), 1)))
    for k in range(coef.size - 1, 1, -1):
        ck = c * coef[k] - mean * math.exp(-lfact[k])
        if k == special:
            ck = -mean * math.exp(-lfact[k])
        acc = acc * z + ck
    acc = acc * z * z
    if special < 0:
        acc = acc + c * math.gamma(1.0 - s) * (-z) ** (s - 1.0)
    else:
        m = special + 1
        harmonic = sum(1.0 / j for j in range(1, m))
        acc = acc + c * z ** (m - 1) / math.factorial(m - 1) * (harmonic - np.log(-z))
    omp = power_one_minus_cf(law, t)
    return acc / (mean * omp * -np.expm1(z))


def tabulated_one_minus_cf(law: RenewalLaw, t) -> np.ndarray:
    """1 - phi(t) by direct summation over the table; tail mass kept at N+1."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n = np.arange(1, law.horizon + 1, dtype=float)
    K = law.pmf[1:]
    out = np.empty(t.shape, dtype=complex)
    for i, ti in enumerate(t):
        arg = n * ti
        re = 2.0 * np.sin(0.5 * arg) ** 2
        out[i] = np.dot(K, re) - 1j * np.dot(K, np.sin(arg))
    if law.tail_mass:
        arg = (law.horizon + 1) * t
        out += law.tail_mass * (2.0 * np.sin(0.5 * arg) ** 2 - 1j * np.sin(arg))
    return out + law.defect


@dataclass(frozen=True)
class CharacteristicFunction:
    law: RenewalLaw
    theta: float = 0.0

    def __call__(self, t) -> np.ndarray:
        return 1.0 - self.one_minus(t)

    def one_minus(self, t) -> np.ndarray:
        if isinstance(self.law, PowerLawRenewal):
            if self.theta == 0.0:
                return power_one_minus_cf(self.law, t)
            F = solve_free_energy(self.law, self.theta)
            return power_one_minus_cf(self.law, t, damping=F, theta=self.theta)
        if self.theta != 0.0:
            raise ValueError("tilting is only wired for power laws")
        return tabulated_one_minus_cf(self.law, t)


def tilted_recurrent_law(law: PowerLawRenewal, theta: float, horizon: int | None = None) -> RenewalLaw:
    """K_theta(n) = e^{theta - F(theta) n} K(n), the recurrent law of the tilted measure."""
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if theta == 0.0:
        return law
    F = solve_free_energy(law, theta)
    N = law.horizon if horizon is None else horizon
    n = np.arange(N + 1, dtype=float)
    n[0] = 1.0
    pmf = math.exp(theta) * law.prefactor * np.exp(-F * n) * n ** (-(1.0 + law.exponent))
    pmf[0] = 0.0
    # the mass beyond N is e^theta sum_{n>N} K(n) e^{-F n}; exact complement of the table
    tail = max(1.0 - math.fsum(pmf), 0.0)
    return RenewalLaw(pmf, tail)


# ---------------------------------------------------------------------------
# Fourier inversion of the mass function
# ---------------------------------------------------------------------------


def mass_by_inversion(law: RenewalLaw, n, theta: float = 0.0, quadrature_points: int = 2**18,
                      support: int = 4096):
    """P_theta(n in tau) from 1/E(tau_1) + (1/2pi) int e^{-int} 2 Re[1/(1-phi)] dt.

    The law is used on {1..support}; the remaining mass sits at support+1,
    which leaves P(n in tau) unchanged for n <= support and makes the
    integrand analytic, so the midpoint trapezoid rule converges
    geometrically. The grid never touches t = 0 and is symmetric under t -> -t.
    """
    exponent = getattr(law, "exponent", law.tail_exponent)
    if exponent is None or exponent <= 1.0:
        raise ValueError("requires exponent > 1")
    base = tilted_recurrent_law(law, theta, support) if theta > 0 else law
    n_arr = np.atleast_1d(np.asarray(n, dtype=np.int64))
    if n_arr.max() > support:
        raise ValueError("n beyond the support used for inversion")
    M = int(quadrature_points)
    if M <= 2 * (support + 2):
        raise ValueError("too few quadrature points for the support")
    pmf = np.zeros(support + 2)
    m = min(support, base.horizon)
    pmf[1 : m + 1] = base.pmf[1 : m + 1]
    pmf[support + 1] = max(1.0 - math.fsum(pmf), 0.0)
    k = np.arange(support + 2, dtype=float)
    mean = math.fsum(k * pmf)

    # t_j = 2 pi (j + 1/2) / M on (0, 2 pi); shift by half a cell via a twiddle
    j = np.arange(M)
    t = 2.0 * np.pi * (j + 0.5) / M
    twiddle = np.exp(1j * np.pi * k / M)
    sin_part = np.fft.ifft(np.pad(pmf * twiddle, (0, M - k.size))) * M  # sum K e^{+ik t_j}
    one_minus = 1.0 - sin_part
    # the real part loses digits near t = 0 through cancellation; redo it directly there
    near = np.minimum(t, 2.0 * np.pi - t) < 0.05
    if np.any(near):
        tn = t[near]
        re = (pmf[None, :] * 2.0 * np.sin(0.5 * np.outer(tn, k)) ** 2).sum(axis=1)
        im = -(pmf[None, :] * np.sin(np.outer(tn, k))).sum(axis=1)
        one_minus[near] = re + 1j * im
    integrand = 2.0 * np.real(1.0 / one_minus)
    # (1/2pi) sum_j w e^{-i n t_j} f(t_j) with w = 2pi/M
    coeff = np.fft.fft(integrand) / M
    phase = np.exp(-1j * np.pi * n_arr / M)
    vals = 1.0 / mean + np.real(coeff[n_arr] * phase)
    # the cosine series of 2 Re[1/(1-phi)] carries u(0) twice in its zeroth coefficient
    vals = vals - (n_arr == 0)
    return vals if np.ndim(n) else float(vals[0])


def mass_by_convolution(law: RenewalLaw, n_max: int, theta: float = 0.0) -> np.ndarray:
    base = tilted_recurrent_law(law, theta, max(n_max, 16)) if theta > 0 else law
    return convolve_renewal(base.pmf, n_max)


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PositivityReport:
    min_mass: float
    positive: bool
    argmin_theta: float
    argmin_n: int


def uniform_positivity_probe(law: PowerLawRenewal, theta_grid, n_max: int) -> PositivityReport:
    """min over theta in the grid and 1 <= n <= n_max of P_theta(n in tau)."""
    if law.exponent <= 1.0:
        raise ValueError("requires exponent > 1")
    best = (math.inf, 0.0, 0)
    for theta in theta_grid:
        u = mass_by_convolution(law, n_max, float(theta))
        i = int(np.argmin(u[1:])) + 1
        if u[i] < best[0]:
            best = (float(u[i]), float(theta), i)
    return PositivityReport(best[0], best[0] > 0.0, best[1], best[2])


@dataclass(frozen=True)
class CFEstimateReport:
    im_lower: float  # min |Im(1-phi)| / t
    im_upper: float  # max |Im(1-phi)| / t
    re_upper: float  # max Re(1-phi) / t^{2 ^ alpha}
    re_nonnegative: bool
    im_slope: float
    re_slope: float
    conjugate_symmetric: bool
    bounded_by_one: bool


def cf_estimate_probe(law: PowerLawRenewal, theta_grid, t_grid) -> CFEstimateReport:
    """Fit the constants in t/c <= |Im(1-phi)| <= c t and Re(1-phi) <= c t^{2 ^ alpha}."""
    if law.exponent <= 1.0:
        raise ValueError("requires exponent > 1")
    t = np.asarray(t_grid, dtype=float)
    a = law.exponent
    p = min(2.0, a)
    lows, ups, reups, im_sl, re_sl = [], [], [], [], []
    nonneg = symmetric = bounded = True
    for theta in theta_grid:
        cf = CharacteristicFunction(law, float(theta))
        om = cf.one_minus(t)
        om_neg = cf.one_minus(-t)
        symmetric &= bool(np.allclose(om_neg, np.conj(om), rtol=1e-12, atol=1e-15))
        bounded &= bool(np.all(np.abs(1.0 - om) <= 1.0 + 1e-12))
        im = np.abs(om.imag)
        re = om.real
        nonneg &= bool(np.all(re >= -1e-15))
        scale = t**p * (1.0 + np.abs(np.log(t)) * (a == 2.0))
        lows.append(float(np.min(im / t)))
        ups.append(float(np.max(im / t)))
        reups.append(float(np.max(re / scale)))
        im_sl.append(loglog_slope(t, im).value)
        re_sl.append(loglog_slope(t, re).value)
    return CFEstimateReport(min(lows), max(ups), max(reups), nonneg,
                            float(np.mean(im_sl)), float(np.mean(re_sl)), symmetric, bounded)
