import math

import numpy as np
import pytest
from scipy import integrate, optimize, special

from renewal_pinning.homogeneous import (
    critical_exponent_fit,
    critical_reward,
    entropy_rate,
    free_energy_curve,
    free_energy_derivative,
    free_energy_expansion_check,
    homogeneous_pinned_log_partition,
    loglog_slope,
    solve_free_energy,
)
from renewal_pinning.renewal_core import geometric_law, law_from_pmf, normalize_power_law, tilt_law


def _brent_oracle(a, h, cut=200_000):
    """F(h) from sum_n K(n) e^{-nx} = e^{-h} with scipy's zeta for the tail mass."""
    c = 1.0 / special.zeta(1.0 + a)
    n = np.arange(1, cut + 1, dtype=float)
    K = c * n ** (-(1.0 + a))
    tail = c * special.zeta(1.0 + a, cut + 1)

    def g(x):
        # the tail beyond cut contributes at most tail * e^{-cut x}, negligible for these x
        return math.fsum(K * -np.expm1(-n * x)) + tail - (-math.expm1(-h))

    return optimize.brentq(g, 1e-12, h + 1.0, xtol=1e-15, rtol=1e-14)


@pytest.mark.parametrize("h", [-1.0, 0.0, 0.5, 3.0])
def test_degenerate_law(h):
    assert solve_free_energy(law_from_pmf([1.0]), h) == pytest.approx(max(h, 0.0), abs=1e-15)


def test_geometric_closed_form():
    q, h = 0.5, 0.3
    F = solve_free_energy(geometric_law(q, 400), h)
    assert F == pytest.approx(h + math.log(1 - q + q * math.exp(-h)), rel=1e-13)


@pytest.mark.parametrize("a", [0.5, 1.5, 2.5])
def test_delocalized(a):
    assert solve_free_energy(normalize_power_law(a, 100), -0.1) == 0.0


@pytest.mark.parametrize("a,h", [(2.5, 0.2), (1.5, 0.05), (0.8, 0.3)])
def test_solver_against_brent(a, h):
    assert solve_free_energy(normalize_power_law(a), h) == pytest.approx(_brent_oracle(a, h), rel=1e-9)


def test_relative_tolerance():
    law = normalize_power_law(1.5)
    exact = solve_free_energy(law, 0.1)
    loose = solve_free_energy(law, 0.1, tol=1e-6)
    assert abs(loose / exact - 1.0) <= 1e-6


def test_residual():
    law = normalize_power_law(0.7)
    h = 0.2
    x = solve_free_energy(law, h)
    assert law.laplace(x) == pytest.approx(math.exp(-h), abs=1e-13)


def test_defective_law_and_tilt():
    base = normalize_power_law(1.2, 5000)
    hp = -0.3
    law = tilt_law(base, hp)
    assert critical_reward(law) == pytest.approx(0.3, rel=1e-12)
    assert solve_free_energy(law, 0.29) == 0.0
    for beta in (0.4, 1.0):
        assert solve_free_energy(law, beta) == pytest.approx(solve_free_energy(base, beta + hp), rel=1e-12)


def test_convexity_and_monotonicity():
    law = normalize_power_law(0.6)
    hs = np.linspace(0.01, 1.0, 25)
    F = np.array([solve_free_energy(law, h) for h in hs])
    assert np.all(np.diff(F) > 0)
    assert np.all(F[1:-1] <= 0.5 * (F[:-2] + F[2:]) + 1e-12)
    assert np.all(F <= hs + 1e-15)


@pytest.mark.parametrize("a,h", [(0.6, 0.1), (1.5, 0.05), (3.0, 0.2)])
def test_derivative_matches_difference(a, h):
    law = normalize_power_law(a)
    step = 1e-5
    fd = (solve_free_energy(law, h + step) - solve_free_energy(law, h - step)) / (2 * step)
    assert free_energy_derivative(law, h) == pytest.approx(fd, abs=1e-4)


@pytest.mark.parametrize("a,h", [(0.6, 0.2), (1.5, 0.1)])
def test_pinned_partition_growth(a, h):
    law = normalize_power_law(a, 4000)
    lz = homogeneous_pinned_log_partition(law, h, 4000)
    slope = (lz[4000] - lz[2000]) / 2000
    assert slope == pytest.approx(solve_free_energy(law, h), abs=1e-3)


@pytest.mark.parametrize("a,nu", [(0.5, 2.0), (2.0, 1.0)])
def test_critical_exponent(a, nu):
    curve = free_energy_curve(normalize_power_law(a), np.geomspace(1e-5, 1e-3, 12))
    est = critical_exponent_fit(curve, (1e-5, 1e-3))
    assert est.value == pytest.approx(nu, rel=0.05)


def test_fit_refuses_few_points():
    curve = free_energy_curve(normalize_power_law(0.5), np.geomspace(1e-5, 1e-3, 7))
    with pytest.raises(ValueError):
        critical_exponent_fit(curve, (1e-5, 1e-3))


def test_loglog_slope_exact():
    x = np.geomspace(1, 100, 10)
    est = loglog_slope(x, 3 * x**1.7)
    assert est.value == pytest.approx(1.7, rel=1e-12)
    assert est.stderr < 1e-10


def test_curve_csv():
    rows = free_energy_curve(normalize_power_law(1.5, 100), [0.1]).to_csv_rows()
    assert rows[0] == "h,F,Fprime" and len(rows) == 2


def test_expansion_alpha_three():
    rep = free_energy_expansion_check(normalize_power_law(3.0), 1e-3)
    assert rep.regime == "alpha>2"
    assert rep.ratio == pytest.approx(1.0, abs=0.1)


def test_expansion_alpha_one_and_half():
    law = normalize_power_law(1.5)
    rep = free_energy_expansion_check(law, 1e-3)
    assert rep.ratio == pytest.approx(1.0, abs=0.1)
    hs = np.geomspace(1e-4, 1e-2, 9)
    ex = [free_energy_expansion_check(law, h).excess for h in hs]
    assert loglog_slope(hs, ex).value == pytest.approx(1.5, abs=0.05)


def test_expansion_constant_by_quadrature():
    a = 1.5
    ref, _ = integrate.quad(lambda t: (math.expm1(-t) + t) * t ** (-(1 + a)), 0, np.inf, limit=200)
    law = normalize_power_law(a)
    rep = free_energy_expansion_check(law, 1e-3)
    assert rep.leading == pytest.approx(law.tail_coef * ref * 1e-3**a / law.mean() ** (a + 1), rel=1e-7)


def test_expansion_edge_cases():
    assert free_energy_expansion_check(normalize_power_law(3.0), 0.0).excess == 0.0
    with pytest.raises(ValueError):
        free_energy_expansion_check(normalize_power_law(0.8), 1e-3)


def test_entropy_rate_zero_and_domain():
    law = normalize_power_law(1.5)
    assert entropy_rate(law, 0.0) == 0.0
    with pytest.raises(ValueError):
        entropy_rate(law, -0.1)


@pytest.mark.parametrize("a,slope", [(3.0, 2.0), (1.5, 1.5)])
def test_entropy_rate_slope(a, slope):
    law = normalize_power_law(a)
    thetas = np.geomspace(1e-4, 1e-2, 9)
    rates = [entropy_rate(law, t) for t in thetas]
    assert all(r > 0 for r in rates)
    assert loglog_slope(thetas, rates).value == pytest.approx(slope, rel=0.1)
