"""Inter-arrival laws, mass renewal functions, sampling and Tauberian utilities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ._special import deficit_integral, hurwitz_tail, upper_gamma, zeta, zeta_series


class Estimate(NamedTuple):
    value: float
    stderr: float


def seed_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for worker/replica ``index`` under a master seed.

    The index is mixed into the seed sequence hash, so the stream depends on
    (seed, index) only and not on how work is scheduled.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# laws
# ---------------------------------------------------------------------------


class RenewalLaw:
    """A tabulated inter-arrival law on {1, ..., N} plus tail and defect.

    ``pmf[n]`` is K(n) for 1 <= n <= N (``pmf[0] == 0``). Mass beyond N is
    ``tail_mass``; when ``tail_exponent`` is set the tail is exactly
    K(n) = tail_coef * n^{-(1 + tail_exponent)} for n > N and every tail
    functional below is evaluated analytically. ``defect`` is K(inf).
    """

    def __init__(self, pmf, tail_mass: float = 0.0, defect: float = 0.0,
                 tail_exponent: float | None = None, tail_coef: float = 0.0):
        pmf = np.array(pmf, dtype=float)
        if pmf.ndim != 1 or pmf.size < 2:
            raise ValueError("pmf must be a 1-d array indexed from 0")
        if pmf[0] != 0.0:
            raise ValueError("pmf[0] must be 0")
        if np.any(pmf < 0):
            raise ValueError("negative probabilities")
        pmf.setflags(write=False)
        self.pmf = pmf
        self.tail_mass = float(tail_mass)
        self.defect = float(defect)
        self.tail_exponent = None if tail_exponent is None else float(tail_exponent)
        self.tail_coef = float(tail_coef)

    # basic accessors -------------------------------------------------------

    @property
    def horizon(self) -> int:
        return self.pmf.size - 1

    @property
    def recurrent(self) -> bool:
        return self.defect == 0.0

    def finite_mass(self) -> float:
        """sum_{n >= 1} K(n) (excludes the defect)."""
        return math.fsum(self.pmf) + self.tail_mass

    def K(self, n):
        """K(n) for integer n >= 1 (arrays allowed), using the tail beyond N."""
        n = np.asarray(n)
        out = np.zeros(n.shape, dtype=float)
        inside = (n >= 1) & (n <= self.horizon)
        out[inside] = self.pmf[n[inside]]
        beyond = n > self.horizon
        if np.any(beyond) and self.tail_exponent is not None:
            out[beyond] = self.tail_coef * n[beyond].astype(float) ** (-(1.0 + self.tail_exponent))
        return out if out.ndim else float(out)

    def survival(self, n_max: int) -> np.ndarray:
        """P(tau_1 > n) for n = 0..n_max (defect included)."""
        if n_max > self.horizon:
            raise ValueError("n_max beyond horizon")
        upper = np.cumsum(self.pmf[:0:-1])[::-1]  # sum_{m >= n} pmf, n = 1..N
        s = np.empty(n_max + 1)
        s[:n_max] = upper[:n_max]
        s[n_max] = upper[n_max] if n_max < self.horizon else 0.0
        return s + self.tail_mass + self.defect

    def _tail_power_sum(self, p: float) -> float:
        """sum_{n > N} n^p K(n) for the analytic tail."""
        if self.tail_mass == 0.0 and self.tail_exponent is None:
            return 0.0
        if self.tail_exponent is None:
            if p == 0:
                return self.tail_mass
            raise ValueError("tail moments need a power-law tail")
        s = 1.0 + self.tail_exponent - p
        if s <= 1.0:
            return math.inf
        return self.tail_coef * hurwitz_tail(s, self.horizon)

    def mean(self) -> float:
        """E(tau_1); infinite for defective laws or tail exponent <= 1."""
        if self.defect > 0.0:
            return math.inf
        n = np.arange(self.horizon + 1, dtype=float)
        return math.fsum(n * self.pmf) + self._tail_power_sum(1.0)

    def second_moment(self) -> float:
        if self.defect > 0.0:
            return math.inf
        n = np.arange(self.horizon + 1, dtype=float)
        return math.fsum(n * n * self.pmf) + self._tail_power_sum(2.0)

    def variance(self) -> float:
        mu = self.mean()
        return self.second_moment() - mu * mu

    # Laplace functionals ---------------------------------------------------

    def laplace_deficit(self, x: float) -> float:
        """sum_{n >= 1} K(n) (1 - e^{-n x}) for x >= 0, with Kahan-exact summation."""
        if x == 0.0:
            return 0.0
        n = np.arange(self.horizon + 1, dtype=float)
        head = math.fsum(self.pmf * -np.expm1(-n * x))
        return head + self._tail_deficit(x)

    def _tail_deficit(self, x: float) -> float:
        if self.tail_exponent is None:
            return self.tail_mass * -math.expm1(-(self.horizon + 1) * x)
        a = self.tail_exponent
        m = self.horizon + 0.5
        # midpoint integral plus its first Euler-Maclaurin correction
        integral = x**a * deficit_integral(a, m * x)
        s = 1.0 + a
        dfm = -s * m ** (-s - 1.0) * -math.expm1(-x * m) + x * m ** (-s) * math.exp(-x * m)
        return self.tail_coef * (integral + dfm / 24.0)

    def laplace_first(self, x: float) -> float:
        """sum_{n >= 1} n K(n) e^{-n x} for x > 0 (or x = 0 when the mean is finite)."""
        if x == 0.0:
            return self.mean() if self.defect == 0.0 else self._mean_finite()
        n = np.arange(self.horizon + 1, dtype=float)
        head = math.fsum(n * self.pmf * np.exp(-n * x))
        if self.tail_exponent is None:
            tail = self.tail_mass * (self.horizon + 1) * math.exp(-(self.horizon + 1) * x)
        else:
            a = self.tail_exponent
            m = self.horizon + 0.5
            tail = self.tail_coef * x ** (a - 1.0) * upper_gamma(1.0 - a, m * x)
        return head + tail

    def _mean_finite(self) -> float:
        n = np.arange(self.horizon + 1, dtype=float)
        return math.fsum(n * self.pmf) + self._tail_power_sum(1.0)

    def laplace(self, x: float) -> float:
        """sum_{n >= 1} K(n) e^{-n x}."""
        return self.finite_mass() - self.laplace_deficit(x)

    # misc -------------------------------------------------------------------

    def scaled(self, factor: float) -> "RenewalLaw":
        """Law with every finite-n mass multiplied by ``factor`` <= 1."""
        if not 0.0 < factor <= 1.0:
            raise ValueError("factor must lie in (0, 1]")
        fm = self.finite_mass()
        return RenewalLaw(self.pmf * factor, self.tail_mass * factor, 1.0 - factor * fm,
                          self.tail_exponent, self.tail_coef * factor)

    def to_csv_rows(self, u: np.ndarray | None = None) -> list[str]:
        rows = ["n,K,u"]
        for n in range(self.horizon + 1):
            uval = "" if u is None or n >= len(u) else repr(float(u[n]))
            rows.append(f"{n},{float(self.pmf[n])!r},{uval}")
        return rows

    def __repr__(self) -> str:
        return (f"RenewalLaw(horizon={self.horizon}, tail_mass={self.tail_mass:.3e}, "
                f"defect={self.defect:.3e}, tail_exponent={self.tail_exponent})")


class PowerLawRenewal(RenewalLaw):
    """K(n) = e^h c n^{-(1+exponent)} on all of N, with c = 1/zeta(1+exponent)."""

    def __init__(self, exponent: float, prefactor: float, tilt: float, horizon: int):
        n = np.arange(horizon + 1, dtype=float)
        n[0] = 1.0
        scale = math.exp(tilt) * prefactor
        pmf = scale * n ** (-(1.0 + exponent))
        pmf[0] = 0.0
        tail = scale * hurwitz_tail(1.0 + exponent, horizon)
        super().__init__(pmf, tail, -math.expm1(tilt), exponent, scale)
        self.exponent = float(exponent)
        self.prefactor = float(prefactor)
        self.tilt = float(tilt)

    def __repr__(self) -> str:
        return (f"PowerLawRenewal(exponent={self.exponent}, prefactor={self.prefactor!r}, "
                f"tilt={self.tilt}, horizon={self.horizon})")


def normalize_power_law(exponent: float, horizon: int = 10_000) -> PowerLawRenewal:
    """Zeta-normalized power law K(n) = n^{-(1+exponent)} / zeta(1+exponent)."""
    if not exponent > 0:
        raise ValueError("exponent must be positive")
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    c = 1.0 / zeta_series(1.0 + exponent)
    return PowerLawRenewal(exponent, c, 0.0, int(horizon))


def tilt_law(law: RenewalLaw, h: float) -> RenewalLaw:
    """K_h(n) = e^h K(n) with defect 1 - e^h (h <= 0)."""
    if h > 0:
        raise ValueError("positive tilt is not a probability law")
    if h == 0:
        return law
    if isinstance(law, PowerLawRenewal):
        if law.tilt != 0.0:
            return PowerLawRenewal(law.exponent, law.prefactor, law.tilt + h, law.horizon)
        return PowerLawRenewal(law.exponent, law.prefactor, h, law.horizon)
    return law.scaled(math.exp(h))


def geometric_law(q: float, horizon: int = 2000) -> RenewalLaw:
    """K(n) = (1-q) q^{n-1}; the tail beyond the horizon is kept as plain mass."""
    n = np.arange(horizon + 1, dtype=float)
    pmf = (1.0 - q) * q ** (n - 1.0)
    pmf[0] = 0.0
    return RenewalLaw(pmf, q**horizon)


def law_from_pmf(values: Sequence[float], defect: float = 0.0) -> RenewalLaw:
    """Finite-support law from K(1), K(2), ... (no tail)."""
    return RenewalLaw(np.concatenate(([0.0], np.asarray(values, dtype=float))), 0.0, defect)


# ---------------------------------------------------------------------------
# mass renewal function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MassFunctionTable:
    values: np.ndarray
    mean_inverse: float
    regime: str
    law: RenewalLaw = field(repr=False)

    def asymptote(self, n):
        """Leading asymptotic form of u(n) for the table's regime."""
        n = np.asarray(n, dtype=float)
        law = self.law
        if not law.recurrent:
            return law.K(n.astype(np.int64)) / law.defect**2
        if self.regime == "alpha<1":
            a = law.tail_exponent
            ca = a * math.sin(math.pi * a) / math.pi
            return ca / law.tail_coef * n ** (a - 1.0)
        if self.regime == "alpha>1":
            return np.full(n.shape, self.mean_inverse)
        raise ValueError("no asymptote for this regime")


def _regime(law: RenewalLaw) -> str:
    if not law.recurrent:
        return "transient"
    a = law.tail_exponent
    if a is None:
        return "alpha>1"
    if a < 1.0:
        return "alpha<1"
    if a == 1.0:
        return "alpha=1 excluded"
    return "alpha>1"


def convolve_renewal(K: np.ndarray, n_max: int) -> np.ndarray:
    """u(0..n_max) from u(n) = sum_{j=1}^n K(j) u(n-j), exact O(n^2)."""
    u = np.zeros(n_max + 1)
    u[0] = 1.0
    k = np.ascontiguousarray(K[1 : n_max + 1])
    for m in range(1, n_max + 1):
        u[m] = np.dot(k[:m], u[m - 1 :: -1])
    return u


def mass_function(law: RenewalLaw, n_max: int) -> MassFunctionTable:
    """Mass renewal function u(n) = P(n in tau) for n <= n_max."""
    if n_max > law.horizon:
        raise ValueError("n_max exceeds the law's horizon")
    u = convolve_renewal(law.pmf, n_max)
    u.setflags(write=False)
    mu = law.mean()
    return MassFunctionTable(u, 0.0 if math.isinf(mu) else 1.0 / mu, _regime(law), law)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DisorderPath:
    hits: np.ndarray  # sorted renewal epochs in [0, window]
    window: int

    def indicator(self, n: int | None = None) -> np.ndarray:
        """delta_k for k = 0..n (defaults to the window)."""
        n = self.window if n is None else n
        if n > self.window:
            raise ValueError("beyond the sampled window")
        d = np.zeros(n + 1, dtype=bool)
        h = self.hits[self.hits <= n]
        d[h] = True
        return d

    def __contains__(self, k: int) -> bool:
        i = np.searchsorted(self.hits, k)
        return bool(i < self.hits.size and self.hits[i] == k)


class _Sampler:
    """Inverse-CDF sampler on the table with a continuous Pareto tail."""

    def __init__(self, law: RenewalLaw):
        if not law.recurrent:
            raise ValueError("sampling needs a recurrent law")
        self.cum = np.cumsum(law.pmf[1:])
        self.top = float(self.cum[-1])
        self.law = law

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        # half-open convention: n with cum(n-1) <= u < cum(n)
        n = np.searchsorted(self.cum, u, side="right").astype(float) + 1.0
        far = u >= self.top
        if np.any(far):
            law = self.law
            N = law.horizon
            q = (1.0 - u[far]) / (1.0 - self.top)
            q = np.clip(q, 1e-300, 1.0)
            if law.tail_exponent is None:
                n[far] = N + 1.0
            else:
                n[far] = np.maximum(np.ceil(N * q ** (-1.0 / law.tail_exponent)), N + 1.0)
        return n


def sample_path(law: RenewalLaw, window: int, seed: int, delay: "StationaryDelay | None" = None,
                rng: np.random.Generator | None = None) -> DisorderPath:
    """One realization of the renewal set restricted to [0, window]."""
    if window < 0:
        raise ValueError("window must be non-negative")
    if not law.recurrent:
        raise ValueError("disorder must be recurrent")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & (2**64 - 1))) if rng is None else rng
    sampler = _Sampler(law)
    start = 0 if delay is None else int(delay.sample(rng, 1)[0])
    if start > window:
        return DisorderPath(np.zeros(0, dtype=np.int64), window)
    mu = law.mean()
    batch = max(16, int(1.2 * window / mu) + 16) if math.isfinite(mu) else 1024
    pieces = [np.array([float(start)])]
    pos = float(start)
    while pos <= window:
        steps = np.cumsum(sampler.draw(rng, batch)) + pos
        pieces.append(steps)
        pos = float(steps[-1])
    hits = np.concatenate(pieces)
    hits = hits[hits <= window].astype(np.int64)
    return DisorderPath(hits, window)


@dataclass(frozen=True)
class StationaryDelay:
    weights: np.ndarray  # P(tau_0 = n) for n = 0..N
    tail_weight: float
    law: RenewalLaw = field(repr=False)

    def total(self) -> float:
        return math.fsum(self.weights) + self.tail_weight

    def mean(self) -> float:
        """E(tau_0) = (E tau_1^2 - E tau_1) / (2 mu)."""
        law = self.law
        return (law.second_moment() - law.mean()) / (2.0 * law.mean())

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        cum = np.cumsum(self.weights)
        u = rng.random(size)
        out = np.searchsorted(cum, u, side="right").astype(float)
        far = u >= cum[-1]
        if np.any(far):
            a = self.law.tail_exponent - 1.0
            N = self.law.horizon
            q = np.clip((1.0 - u[far]) / max(1.0 - cum[-1], 1e-300), 1e-300, 1.0)
            out[far] = np.maximum(np.ceil(N * q ** (-1.0 / a)), N + 1.0)
        return out


def stationary_delay(law: RenewalLaw) -> StationaryDelay:
    """Delay law P(tau_0 = n) = P(tau_1 > n) / mu of the stationary renewal."""
    if law.tail_exponent is not None and law.tail_exponent <= 1.0:
        raise ValueError("requires a finite mean")
    mu = law.mean()
    if not math.isfinite(mu):
        raise ValueError("requires a finite mean")
    N = law.horizon
    w = law.survival(N) / mu
    if law.tail_exponent is None:
        tail = 0.0
    else:
        a = law.tail_exponent
        # sum_{n > N} P(tau_1 > n) = sum_{m > N} (m - N - 1) K(m)
        tail = law.tail_coef * (hurwitz_tail(a, N) - (N + 1) * hurwitz_tail(1.0 + a, N)) / mu
    return StationaryDelay(w, tail, law)


def covariance_decay(law: RenewalLaw, lag, table: MassFunctionTable | None = None):
    """Cov(delta_0, delta_lag) = (1/mu)(u(lag) - 1/mu) of the stationary renewal."""
    mu = law.mean()
    if not math.isfinite(mu) or (law.tail_exponent is not None and law.tail_exponent <= 1.0):
        raise ValueError("requires exponent > 1")
    lag_arr = np.asarray(lag)
    top = int(np.max(lag_arr))
    if table is None or table.values.size <= top:
        table = mass_function(law, top)
    out = (table.values[lag_arr] - 1.0 / mu) / mu
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# Tauberian series asymptotics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesAsymptotics:
    value: float
    predicted: float
    ratio: float
    constant: float
    exponent: float
    case: str


def _series_constant(lam: float, variant: str) -> tuple[float, float, str]:
    if variant == "one_minus_exp":
        if lam > 2:
            return zeta(lam - 1.0), 1.0, "(i) lambda > 2"
        if 1 < lam < 2:
            return -math.gamma(1.0 - lam), lam - 1.0, "(i) 1 < lambda < 2"
        raise ValueError("one_minus_exp: lambda must lie in (1,2) or (2,inf)")
    if variant == "exp_minus_one_plus":
        if lam > 3:
            return 0.5 * zeta(lam - 2.0), 2.0, "(ii) lambda > 3"
        if 2 < lam < 3:
            return math.gamma(1.0 - lam), lam - 1.0, "(ii) 2 < lambda < 3"
        raise ValueError("exp_minus_one_plus: lambda must lie in (2,3) or (3,inf)")
    if variant == "plain_exp":
        if 0 < lam < 1:
            return math.gamma(1.0 - lam), lam - 1.0, "(iii) 0 < lambda < 1"
        if lam > 1:
            return zeta(lam), 0.0, "summable"
        raise ValueError("plain_exp: lambda = 1 is log-corrected")
    raise ValueError(f"unknown variant {variant!r}")


def _series_value(lam: float, variant: str, x: float) -> float:
    kmax = int(min(5e7, max(1e3, 60.0 / x)))
    k = np.arange(1, kmax + 1, dtype=float)
    r = k ** (-lam)
    xk = x * k
    if variant == "one_minus_exp":
        f = -np.expm1(-xk)
        tail = hurwitz_tail(lam, kmax)
    elif variant == "plain_exp":
        f = np.exp(-xk)
        tail = 0.0
    else:
        f = np.expm1(-xk) + xk
        small = xk < 1e-3
        z = xk[small]
        f[small] = z * z * (0.5 - z / 6.0 + z * z / 24.0 - z**3 / 120.0)
        tail = x * hurwitz_tail(lam - 1.0, kmax) - hurwitz_tail(lam, kmax)
    terms = (r * f)[::-1]
    return float(np.sum(terms)) + tail


def series_asymptotics(lam: float, variant: str, x: float) -> SeriesAsymptotics:
    """Evaluate sum_k k^{-lam} f(x k) and its predicted leading form A x^p."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not 0 < x <= 0.1:
        raise ValueError("x must lie in (0, 0.1]")
    const, power, case = _series_constant(lam, variant)
    value = _series_value(lam, variant, x)
    pred = const * x**power
    return SeriesAsymptotics(value, pred, value / pred, const, power, case)


# ---------------------------------------------------------------------------
# negative moments of tau_k
# ---------------------------------------------------------------------------


def negative_moment_tau_k(law: RenewalLaw, k: int, r: float, samples: int, seed: int,
                          chunk: int = 2_000_000) -> Estimate:
    """Monte Carlo estimate of E(tau_k^{-r})."""
    if samples < 100:
        raise ValueError("need at least 100 samples")
    if k < 1 or r <= 0:
        raise ValueError("k >= 1 and r > 0 required")
    sampler = _Sampler(law)
    rng = seed_stream(seed, 0)
    per = max(1, chunk // k)
    vals = []
    done = 0
    while done < samples:
        m = min(per, samples - done)
        tot = np.zeros(m)
        left = k
        while left > 0:
            step = min(left, max(1, chunk // m))
            tot += sampler.draw(rng, m * step).reshape(m, step).sum(axis=1)
            left -= step
        vals.append(tot ** (-r))
        done += m
    v = np.concatenate(vals)
    return Estimate(float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)))


def exact_negative_moment_tau1(law: RenewalLaw, r: float) -> float:
    """E(tau_1^{-r}) = sum_n K(n) n^{-r} (with analytic tail when available)."""
    n = np.arange(1, law.horizon + 1, dtype=float)
    head = math.fsum(law.pmf[1:] * n ** (-r))
    if law.tail_exponent is not None:
        head += law.tail_coef * hurwitz_tail(1.0 + law.tail_exponent + r, law.horizon)
    return head
