"""Cluster expansions of moments, gap decomposition, decoupling and second-moment probes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .renewal_core import RenewalLaw, convolve_renewal, tilt_law


# ---------------------------------------------------------------------------
# gaps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GapDecomposition:
    gaps: tuple[int, ...]

    @property
    def g(self) -> int:
        return len(self.gaps)

    @property
    def zero_gaps(self) -> int:
        return sum(1 for d in self.gaps if d == 0)


def _last_gap(I: list[int], J: list[int]) -> tuple[int, int]:
    """(gap(I, J), p(I, J)) for sorted non-empty lists."""
    a, b = I[-1], J[-1]
    if a == b:
        return 0, a
    if a > b:
        I, J = J, I
        a, b = b, a
    # first point of the later set beyond the other set's last point
    for j in J:
        if j > a:
            return j - a, j
    raise AssertionError("unreachable")


def gap_decompose(I: Iterable[int], J: Iterable[int]) -> GapDecomposition:
    """Backward exploration of two finite sets producing the gap sequence."""
    A = sorted(set(I))
    B = sorted(set(J))
    gaps = []
    while A and B:
        d, p = _last_gap(A, B)
        gaps.append(d)
        A = [x for x in A if x < p]
        B = [x for x in B if x < p]
    return GapDecomposition(tuple(gaps))


# ---------------------------------------------------------------------------
# r(i) and the decoupling inequality
# ---------------------------------------------------------------------------


def _limit_value(disorder: RenewalLaw) -> float:
    exponent = disorder.tail_exponent
    mu = disorder.mean()
    if (exponent is not None and exponent <= 1.0) or not math.isfinite(mu):
        raise ValueError("r(i) needs alpha_hat > 1 (u_hat must have a positive limit)")
    return 1.0 / mu


def r_table(disorder: RenewalLaw, horizon: int, u: np.ndarray | None = None) -> np.ndarray:
    """r(i) = sup_{j >= i} |1 - u(i)/u(j)| for i = 0..horizon.

    The sup splits into the scan j <= horizon and the limit u(j) -> 1/mu; as
    |1 - u(i)/x| is monotone on either side of x = u(i), only the running
    extremes of u over j >= i matter.
    """
    lim = _limit_value(disorder)
    if u is None:
        u = convolve_renewal(disorder.pmf, horizon)
    u = np.asarray(u[: horizon + 1], dtype=float)
    smax = np.maximum.accumulate(u[::-1])[::-1]
    smin = np.minimum.accumulate(u[::-1])[::-1]
    smax = np.maximum(smax, lim)
    smin = np.minimum(smin, lim)
    return np.maximum(np.abs(1.0 - u / smax), np.abs(1.0 - u / smin))


def r_function(disorder: RenewalLaw, i: int, horizon: int | None = None) -> float:
    H = disorder.horizon if horizon is None else horizon
    if not 0 <= i <= H:
        raise ValueError("i outside [0, horizon]")
    return float(r_table(disorder, H)[i])


def product_mass(u: np.ndarray, points: Iterable[int]) -> float:
    """U(I) = P(I subset of tau) = prod of u over consecutive increments from 0."""
    last = 0
    out = 1.0
    for p in sorted(set(points)):
        out *= u[p - last]
        last = p
    return out


@dataclass(frozen=True)
class DecouplingResult:
    lhs: float
    rhs: float
    holds: bool
    gaps: GapDecomposition


class DecouplingChecker:
    """Evaluates both sides of U_hat(I cup J) <= U_hat(I) U_hat(J) prod (1 + r(gap))."""

    def __init__(self, disorder: RenewalLaw, horizon: int):
        self.u = convolve_renewal(disorder.pmf, horizon)
        self.r = r_table(disorder, horizon, self.u)
        self.horizon = horizon
        # test hook: the mass function used on the left-hand side only
        self.u_lhs = self.u

    def __call__(self, I: Sequence[int], J: Sequence[int]) -> DecouplingResult:
        pts = set(I) | set(J)
        if pts and (min(pts) < 1 or max(pts) > self.horizon):
            raise ValueError("points must lie in [1, horizon]")
        gd = gap_decompose(I, J)
        lhs = product_mass(self.u_lhs, pts)
        rhs = product_mass(self.u, I) * product_mass(self.u, J)
        for d in gd.gaps:
            rhs *= 1.0 + self.r[d]
        return DecouplingResult(lhs, rhs, lhs <= rhs * (1.0 + 1e-12), gd)


def decoupling_check(disorder: RenewalLaw, I: Sequence[int], J: Sequence[int],
                     horizon: int = 200) -> DecouplingResult:
    return DecouplingChecker(disorder, horizon)(I, J)


# ---------------------------------------------------------------------------
# cluster expansions by subset enumeration
# ---------------------------------------------------------------------------

MAX_EXPANSION = 12


def subset_products(u: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """U(I) and |I| for every I subset of [n], indexed by bitmask (bit k-1 <-> k)."""
    masks = np.arange(2**n, dtype=np.int64)
    prod = np.ones(masks.size)
    size = np.zeros(masks.size, dtype=np.int64)
    last = np.zeros(masks.size, dtype=np.int64)
    for k in range(1, n + 1):
        on = ((masks >> (k - 1)) & 1).astype(bool)
        prod[on] *= u[k - last[on]]
        last[on] = k
        size[on] += 1
    return prod, size


def moment_cluster_expansion(order: int, base_tilted: RenewalLaw, disorder: RenewalLaw,
                             beta: float, n: int) -> float:
    """First or second moment of the free Z_bar as a sum over subsets of [n]."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if n > MAX_EXPANSION:
        raise ValueError(f"enumeration is limited to n <= {MAX_EXPANSION}")
    z = math.expm1(beta)
    uh = convolve_renewal(base_tilted.pmf, n)
    uhat = convolve_renewal(disorder.pmf, n)
    Uh, size = subset_products(uh, n)
    Uhat, _ = subset_products(uhat, n)
    w = z ** size.astype(float) * Uh
    if order == 1:
        return math.fsum(w * Uhat)
    idx = np.arange(w.size, dtype=np.int64)
    total = 0.0
    for I in range(w.size):
        total += w[I] * float(np.dot(w, Uhat[idx | I]))
    return total


# ---------------------------------------------------------------------------
# dynamic programmes for the moments
# ---------------------------------------------------------------------------

MAX_SECOND_MOMENT = 300


def first_moment_dp(base_tilted: RenewalLaw, disorder: RenewalLaw, beta: float, n: int) -> np.ndarray:
    """Z_bar^a_m for m = 0..n: W(p) = sum_q W(q) z u_h(p-q) u_hat(p-q), total sum_{p<=m} W(p)."""
    z = math.expm1(beta)
    c = z * convolve_renewal(base_tilted.pmf, n) * convolve_renewal(disorder.pmf, n)
    W = np.zeros(n + 1)
    W[0] = 1.0
    for p in range(1, n + 1):
        W[p] = np.dot(W[:p], c[p:0:-1])
    return np.cumsum(W)


def second_moment_dp(base_tilted: RenewalLaw, disorder: RenewalLaw, beta: float, n: int,
                     all_n: bool = False):
    """E_hat(Z_bar^2) by a recursion over the points of I cup J in increasing order.

    State at a union point p: whether p is in I only, J only or both, and the
    last point q < p of the other set (q = 0 when that set is still empty).
    U_h(I) U_h(J) U_hat(I cup J) factorizes over these steps, so
    S[p, q] (p in I only; J-only is the mirror image) and B[p] (p in both) obey

      S[p', q] = B[q] c1(p'-q) + sum_p S[p, q] c1(p'-p)          (p' joins the same side)
               + z u_hat(p'-q) sum_r S[q, r] u_h(p'-r)           (p' switches side)
      B[p']    = B[p] z^2 u_h(p'-p)^2 u_hat(p'-p)
               + 2 z^2 sum_{p,q} S[p, q] u_h(p'-p) u_h(p'-q) u_hat(p'-p)

    with c1(d) = z u_h(d) u_hat(d). Defective increments of the tilted replicas
    enter through u_h; no separate absorbing state is needed.
    """
    if n > MAX_SECOND_MOMENT:
        raise ValueError(f"n is limited to {MAX_SECOND_MOMENT}")
    z = math.expm1(beta)
    uh = convolve_renewal(base_tilted.pmf, n)
    uhat = convolve_renewal(disorder.pmf, n)
    c1 = z * uh * uhat
    S = np.zeros((n + 1, n + 1))
    B = np.zeros(n + 1)
    B[0] = 1.0
    totals = np.zeros(n + 1)
    totals[0] = 1.0
    for pp in range(1, n + 1):
        q = np.arange(pp)
        # same side: from B at q, and from S[p, q] with q < p < pp
        new = B[:pp] * c1[pp - q]
        for p in range(1, pp):
            # S[p, :p] carries q < p
            new[:p] += S[p, :p] * c1[pp - p]
        # side switch: new state (pp, q) from S[q, r], r < q
        sw = np.zeros(pp)
        if pp > 1:
            sw[1:] = S[1:pp, :pp] @ uh[pp - np.arange(pp)]
        new += z * uhat[pp - q] * sw
        S[pp, :pp] = new
        # both sides
        b = B[:pp] @ (z * z * uh[pp - q] ** 2 * uhat[pp - q])
        if pp > 1:
            inner = S[1:pp, :pp] @ uh[pp - np.arange(pp)]
            b += 2.0 * z * z * float(np.dot(inner, uh[pp - np.arange(1, pp)] * uhat[pp - np.arange(1, pp)]))
        B[pp] = b
        totals[pp] = totals[pp - 1] + B[pp] + 2.0 * S[pp, :pp].sum()
    return totals if all_n else float(totals[n])


@dataclass(frozen=True)
class BoundednessReport:
    beta: float
    h: float
    n_grid: tuple[int, ...]
    first: tuple[float, ...]
    second: tuple[float, ...]
    first_max: float
    first_bounded: bool  # first moment <= 2 on every n tried
    window_growth: float  # relative growth of the second moment over the last half of the grid range
    flat: bool


def boundedness_probe(base: RenewalLaw, disorder: RenewalLaw, beta: float, n_grid: Sequence[int],
                      h: float | None = None, tol: float = 0.01) -> BoundednessReport:
    """First and second moments of Z_bar at the annealed critical point on ``n_grid``.

    ``window_growth`` compares the largest n with the one closest to half of it.
    """
    if h is None:
        from .annealed import annealed_critical_point

        h = annealed_critical_point(base, disorder, beta)
    grid = tuple(sorted(int(n) for n in n_grid))
    top = grid[-1]
    law = tilt_law(base, h)
    first_all = first_moment_dp(law, disorder, beta, top)
    second_all = second_moment_dp(law, disorder, beta, top, all_n=True)
    first = tuple(float(first_all[n]) for n in grid)
    second = tuple(float(second_all[n]) for n in grid)
    lo = min(grid, key=lambda n: abs(n - top / 2))
    growth = float(second_all[top] / second_all[lo] - 1.0)
    fmax = float(first_all[1:].max())
    return BoundednessReport(beta, h, grid, first, second, fmax, fmax <= 2.0, growth,
                             abs(growth) <= tol)
