"""Special functions used by the renewal laws.

Everything here is written against the standard library and numpy only, so
that the external special-function routines in scipy/mpmath stay available
as independent oracles in the tests.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

# B_2, B_4, ..., B_24
_BERNOULLI_2J = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
)


def _em_tail(s: float, m: float, terms: int = 8) -> float:
    """Euler-Maclaurin value of sum_{n >= m} n^{-s} from the integral side."""
    val = m ** (1.0 - s) / (s - 1.0) + 0.5 * m ** (-s)
    poch = s  # s (s+1) ... (s+2j-2)
    for j in range(1, terms + 1):
        b = _BERNOULLI_2J[j - 1]
        val += b / math.factorial(2 * j) * poch * m ** (-s - 2 * j + 1)
        poch *= (s + 2 * j - 1) * (s + 2 * j)
    return val


def hurwitz_tail(s: float, n: int) -> float:
    """sum_{k > n} k^{-s} for s > 1 and n >= 0."""
    if s <= 1.0:
        raise ValueError("hurwitz_tail needs s > 1")
    # sum a short explicit stretch so that the EM remainder is tiny even for large s
    m = max(n + 1, int(math.ceil(2.0 * s)) + 16)
    k = np.arange(n + 1, m, dtype=float)
    head = float(np.sum(k[::-1] ** (-s))) if k.size else 0.0
    return head + _em_tail(s, float(m))


def zeta_series(s: float, terms: int = 10**6) -> float:
    """Riemann zeta for s > 1 by direct summation plus the Euler-Maclaurin tail."""
    if s <= 1.0:
        raise ValueError("zeta_series needs s > 1")
    k = np.arange(terms, 0, -1, dtype=float)  # smallest terms first
    return float(np.sum(k ** (-s))) + hurwitz_tail(s, terms)


def zeta(s: float) -> float:
    """Riemann zeta on the real line (s != 1), via Euler-Maclaurin and reflection."""
    if s == 1.0:
        raise ValueError("pole at s = 1")
    if s < -0.5:
        if s == math.floor(s) and int(s) % 2 == 0:
            return 0.0
        # reflection: zeta(s) = 2^s pi^(s-1) sin(pi s/2) Gamma(1-s) zeta(1-s)
        t = 1.0 - s
        lg = math.lgamma(t)
        mag = math.exp(s * math.log(2.0) + (s - 1.0) * math.log(math.pi) + lg)
        return mag * math.sin(0.5 * math.pi * s) * zeta(t)
    n = 20
    k = np.arange(n - 1, 0, -1, dtype=float)
    return float(np.sum(k ** (-s))) + _em_tail(s, float(n), terms=12)


# ---------------------------------------------------------------------------
# incomplete gamma for arbitrary real order
# ---------------------------------------------------------------------------


def _gamma_cf(a: float, y: float) -> float:
    """Upper incomplete gamma by Lentz continued fraction (valid for y >= 1)."""
    tiny = 1e-300
    b = y + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-y + a * math.log(y)) * h


def _gamma_low_piece(a: float, y: float) -> float:
    """int_y^1 u^{a-1} e^{-u} du for 0 < y < 1 and any real a."""
    total = 0.0
    fact = 1.0
    for k in range(0, 60):
        if k > 0:
            fact *= -1.0 / k
        p = a + k
        if p == 0.0:
            piece = -math.log(y)
        else:
            piece = (1.0 - y**p) / p
        term = fact * piece
        total += term
        if k > 4 and abs(term) < 1e-18 * max(1.0, abs(total)):
            break
    return total


def upper_gamma(a: float, y: float) -> float:
    """Gamma(a, y) = int_y^inf u^{a-1} e^{-u} du for real a and y > 0."""
    if y <= 0.0:
        raise ValueError("upper_gamma needs y > 0")
    if y > 745.0:
        return 0.0
    if y >= 1.0:
        return _gamma_cf(a, y)
    return _gamma_cf(a, 1.0) + _gamma_low_piece(a, y)


def deficit_integral(a: float, y: float) -> float:
    """E(y) = int_y^inf u^{-(1+a)} (1 - e^{-u}) du for a > 0, y > 0."""
    if y >= 1.0:
        return y ** (-a) / a - upper_gamma(-a, y)
    # E(1) + int_y^1 u^{-a} (1-e^{-u})/u du, expanded in powers of u
    total = 1.0 / a - upper_gamma(-a, 1.0)
    fact = 1.0
    for k in range(0, 60):
        if k > 0:
            fact *= -1.0 / (k + 1)
        p = k - a + 1.0
        if p == 0.0:
            piece = -math.log(y)
        else:
            piece = (1.0 - y**p) / p
        term = fact * piece
        total += term
        if k > 4 and abs(term) < 1e-18 * abs(total):
            break
    return total


# ---------------------------------------------------------------------------
# polylogarithm Li_s(e^mu) near mu = 0
# ---------------------------------------------------------------------------

_POLY_TERMS = 90


@lru_cache(maxsize=64)
def _poly_coeffs(s: float) -> tuple[np.ndarray, int]:
    """Coefficients zeta(s-k)/k!, with the singular index zeroed for integer s."""
    special = -1
    if s == math.floor(s):
        special = int(s) - 1
    coef = np.zeros(_POLY_TERMS)
    lfact = 0.0
    for k in range(_POLY_TERMS):
        if k > 0:
            lfact += math.log(k)
        if k == special:
            continue
        z = zeta(s - k)
        coef[k] = z * math.exp(-lfact)
    return coef, special


def polylog_exp(s: float, mu, drop_constant: bool = False) -> np.ndarray:
    """Li_s(e^mu) for complex mu with |mu| < 2 pi and Re(mu) <= 0.

    With ``drop_constant`` the k = 0 term zeta(s) is omitted, which is what
    one needs for 1 - c Li_s(e^mu) when c = 1/zeta(s).
    """
    mu = np.asarray(mu, dtype=complex)
    coef, special = _poly_coeffs(float(s))
    acc = np.zeros_like(mu)
    for k in range(_POLY_TERMS - 1, 0, -1):
        acc = acc * mu + coef[k]
    acc = acc * mu
    if not drop_constant:
        acc = acc + coef[0]
    minus_mu = -mu
    if special < 0:
        acc = acc + math.gamma(1.0 - s) * minus_mu ** (s - 1.0)
    else:
        m = special + 1
        harmonic = sum(1.0 / j for j in range(1, m))
        acc = acc + mu ** (m - 1) / math.factorial(m - 1) * (harmonic - np.log(minus_mu))
    return acc
