import itertools
import math

import numpy as np
import pytest

from renewal_pinning.homogeneous import homogeneous_pinned_log_partition, solve_free_energy
from renewal_pinning.quenched import (
    CSV_HEADER,
    jackknife,
    monotonicity_check,
    quenched_free_energy_grid,
    quenched_free_energy_mc,
    quenched_partition_dp,
    tilt_vs_shift_probe,
    tilted_disorder_enumerate,
    tilted_normalizer,
)
from renewal_pinning.renewal_core import DisorderPath, law_from_pmf, normalize_power_law


def _enumerate_Z(law, hits, beta, h, n):
    """Pinned and free partition functions by summing over every subset of [1, n]."""
    hitset = set(hits)
    pinned = free = 0.0
    for size in range(n + 1):
        for pts in itertools.combinations(range(1, n + 1), size):
            w, last = 1.0, 0
            for p in pts:
                w *= law.K(p - last) * math.exp(h + beta * (p in hitset))
                last = p
            if pts and pts[-1] == n:
                pinned += w
            free += w * (1.0 - sum(law.K(d) for d in range(1, n - last + 1)))
    return pinned, free


@pytest.mark.parametrize("beta,h", [(0.0, 0.0), (0.7, -0.3), (-0.4, 0.5)])
def test_dp_matches_enumeration(beta, h):
    law = normalize_power_law(0.6, 50)
    hits = [0, 2, 3, 7, 9]
    path = DisorderPath(np.array(hits), 10)
    table = quenched_partition_dp(path, law, beta, h, 10)
    pinned, free = _enumerate_Z(law, hits, beta, h, 10)
    assert math.exp(table.logZ_pinned[10]) == pytest.approx(pinned, rel=1e-12)
    assert math.exp(table.log_free()) == pytest.approx(free, rel=1e-12)


def test_beta_zero_is_homogeneous():
    law = normalize_power_law(1.5, 500)
    path = DisorderPath(np.array([0, 5, 17, 300]), 500)
    table = quenched_partition_dp(path, law, 0.0, 0.2, 500)
    ref = homogeneous_pinned_log_partition(law, 0.2, 500)
    np.testing.assert_allclose(table.logZ_pinned, ref, rtol=1e-12)


def test_dp_window_guard():
    law = normalize_power_law(1.5, 100)
    with pytest.raises(ValueError):
        quenched_partition_dp(DisorderPath(np.array([0]), 10), law, 0.1, 0.0, 20)


def test_jackknife_mean():
    x = np.array([1.0, 2.0, 4.0, 7.0])
    est, se = jackknife(x)
    assert est == pytest.approx(x.mean())
    assert se == pytest.approx(x.std(ddof=1) / 2.0, rel=1e-12)


def test_replica_floor():
    law = normalize_power_law(0.6, 200)
    with pytest.raises(ValueError):
        quenched_free_energy_mc(law, normalize_power_law(2.5, 200), 0.5, 0.0, 100, 15, 1)


def test_mc_deterministic_across_threads():
    law, dis = normalize_power_law(0.6, 400), normalize_power_law(2.5, 400)
    a = quenched_free_energy_grid(law, dis, [(0.5, 0.0), (0.5, -0.1)], 400, 16, 99, threads=1)
    b = quenched_free_energy_grid(law, dis, [(0.5, 0.0), (0.5, -0.1)], 400, 16, 99, threads=4)
    for x, y in zip(a, b):
        assert x.csv_row() == y.csv_row()
        np.testing.assert_array_equal(x.samples, y.samples)
    assert CSV_HEADER.count(",") == a[0].csv_row().count(",")


def test_quenched_below_annealed_bound():
    law, dis = normalize_power_law(0.6, 800), normalize_power_law(2.5, 800)
    est = quenched_free_energy_mc(law, dis, 0.5, 0.1, 800, 16, 5)
    # the quenched value cannot exceed F(0, h + beta)
    assert est.value <= solve_free_energy(law, 0.6) + 3 * est.stderr + 2 * math.log(800) / 800


def test_tilted_normalizer_matches_enumeration():
    dis = normalize_power_law(1.5, 40)
    for theta in (-0.5, 0.0, 0.8):
        m = tilted_disorder_enumerate(dis, 10, theta)
        assert m.log_normalizer == pytest.approx(tilted_normalizer(dis, 10, theta), rel=1e-12)
        assert m.weights.sum() == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("theta", [-0.3, 0.0, 0.4])
def test_marginal_identity(theta):
    dis = normalize_power_law(1.5, 40)
    n = 12
    lz = homogeneous_pinned_log_partition(dis, theta, n)
    expected = np.exp(lz[: n + 1] + lz[n::-1] - lz[n])
    np.testing.assert_allclose(tilted_disorder_enumerate(dis, n, theta).marginal(), expected, rtol=1e-12)


def test_enumeration_limit():
    with pytest.raises(ValueError):
        tilted_disorder_enumerate(normalize_power_law(1.5, 40), 21, 0.0)


@pytest.mark.parametrize("ah,theta", [(0.5, 0.0), (1.5, 0.3), (2.5, -0.5)])
def test_power_law_monotone(ah, theta):
    rep = monotonicity_check(tilted_disorder_enumerate(normalize_power_law(ah, 40), 8, theta))
    assert rep.monotone and rep.witness is None


def test_non_log_convex_witness():
    law = law_from_pmf([0.2, 0.5, 0.1, 0.1, 0.05, 0.03, 0.01, 0.01])
    rep = monotonicity_check(tilted_disorder_enumerate(law, 8, 0.0))
    assert not rep.monotone
    k, small, large = rep.witness
    assert small & large == small and small != large
    assert not (small >> (k - 1)) & 1 and not (large >> (k - 1)) & 1


def test_tilt_vs_shift_probe_runs():
    law, dis = normalize_power_law(0.6, 300), normalize_power_law(2.5, 300)
    rep = tilt_vs_shift_probe(law, dis, 0.5, 0.0, 0.3, 200, 64, 11)
    assert math.isfinite(rep.diff) and rep.diff_stderr >= 0
    assert set(rep.shifted) == {0.1, 1.0}
    with pytest.raises(ValueError):
        tilt_vs_shift_probe(law, normalize_power_law(0.8, 300), 0.5, 0.0, 0.3, 200, 64, 11)
