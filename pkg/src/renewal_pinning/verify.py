"""Verification suites: quick, seeded checks of oracles, inequalities, asymptotics and spectra."""

from __future__ import annotations

import itertools
import math
from typing import Any, Callable

import numpy as np

from .annealed import annealed_critical_point, annealed_free_energy, beta_zero, fourier_pair
from .homogeneous import fit_homogeneous_exponent, free_energy_expansion_check
from .moments_gaps import (
    DecouplingChecker,
    first_moment_dp,
    gap_decompose,
    moment_cluster_expansion,
    second_moment_dp,
)
from .quenched import (
    monotonicity_check,
    quenched_free_energy_mc,
    quenched_partition_dp,
    tilted_disorder_enumerate,
)
from .renewal_core import normalize_power_law, sample_path, seed_stream, tilt_law
from .spectral import mass_by_convolution, mass_by_inversion

SUITE_CHECKS: dict[str, tuple[str, ...]] = {
    "oracles": ("partition_enumeration", "moment_expansions"),
    "inequalities": ("decoupling_fuzz", "gap_identity", "monotonicity", "jensen"),
    "asymptotics": ("annealed_curve", "beta0_sign", "homogeneous_exponent", "homogeneous_expansion"),
    "spectral": ("fourier_inversion",),
}
# a fixed stream index per check keeps seeds stable whichever suite runs it
_INDEX = {name: i for i, name in enumerate(itertools.chain(*SUITE_CHECKS.values()))}


def _check(name: str, ok: bool, seed: int | None, values: dict, witness: Any = None) -> dict:
    out = {"name": name, "status": "pass" if ok else "fail", "seed": seed, "values": values}
    if witness is not None:
        out["witness"] = witness
    return out


def _enumerate_pinned(logK: np.ndarray, reward: np.ndarray, n: int) -> float:
    """Z^c_n as a sum over every contact set containing n."""
    total = 0.0
    for mask in range(2 ** (n - 1)):
        pts = [k for k in range(1, n) if mask >> (k - 1) & 1] + [n]
        last, logw = 0, 0.0
        for p in pts:
            logw += logK[p - last] + reward[p]
            last = p
        total += math.exp(logw)
    return total


def check_partition_enumeration(seed: int, fault: str) -> dict:
    rng = seed_stream(seed, _INDEX["partition_enumeration"])
    worst = 0.0
    tuples = 40
    for t in range(tuples):
        a, ah = rng.uniform(0.2, 2.5), rng.uniform(0.2, 3.0)
        beta, h = rng.uniform(0.0, 2.0), rng.uniform(-1.5, 1.0)
        n = int(rng.integers(2, 11))
        law = normalize_power_law(a, 16)
        path = sample_path(normalize_power_law(ah, 64), n, seed, rng=seed_stream(seed, 1000 + t))
        table = quenched_partition_dp(path, law, beta, h, n)
        logK = np.log(np.concatenate([[1.0], law.pmf[1 : n + 1]]))
        reward = h + beta * path.indicator(n).astype(float)
        ref = _enumerate_pinned(logK, reward, n)
        worst = max(worst, abs(math.exp(table.logZ_pinned[n]) / ref - 1.0))
    return _check("partition_enumeration", worst <= 1e-10, seed, {"tuples": tuples, "max_rel_err": worst})


def check_moment_expansions(seed: int, fault: str) -> dict:
    worst = 0.0
    for a, ah, beta in [(0.3, 2.5, 0.05), (0.7, 1.5, 0.3), (1.5, 0.6, 0.5)]:
        base = normalize_power_law(a, 32)
        disorder = normalize_power_law(ah, 32)
        law = tilt_law(base, -0.1)
        for n in (4, 8):
            e1 = moment_cluster_expansion(1, law, disorder, beta, n)
            e2 = moment_cluster_expansion(2, law, disorder, beta, n)
            worst = max(worst, abs(first_moment_dp(law, disorder, beta, n)[n] / e1 - 1.0),
                        abs(second_moment_dp(law, disorder, beta, n) / e2 - 1.0))
    return _check("moment_expansions", worst <= 1e-10, None, {"max_rel_err": worst})


def _random_set(rng: np.random.Generator, horizon: int) -> list[int]:
    size = int(rng.integers(0, 7))
    if rng.random() < 0.5:
        return sorted(set(int(x) for x in rng.integers(1, horizon + 1, size)))
    start = int(rng.integers(1, horizon + 1))
    return sorted(set(min(horizon, start + int(x)) for x in rng.integers(0, 12, size)))


def check_decoupling_fuzz(seed: int, fault: str) -> dict:
    rng = seed_stream(seed, _INDEX["decoupling_fuzz"])
    horizon, pairs = 200, 1000
    violations, witness = 0, None
    for ah in (2.2, 2.5, 3.0):
        checker = DecouplingChecker(normalize_power_law(ah, horizon), horizon)
        if fault == "uhat":
            checker.u_lhs = checker.u * 1.25
        for _ in range(pairs):
            I, J = _random_set(rng, horizon), _random_set(rng, horizon)
            res = checker(I, J)
            if not res.holds:
                violations += 1
                if witness is None:
                    witness = {"alpha_hat": ah, "I": I, "J": J, "lhs": res.lhs, "rhs": res.rhs}
    return _check("decoupling_fuzz", violations == 0, seed,
                  {"pairs": 3 * pairs, "violations": violations}, witness)


def check_gap_identity(seed: int, fault: str) -> dict:
    rng = seed_stream(seed, _INDEX["gap_identity"])
    bad = 0
    for _ in range(1000):
        I, J = _random_set(rng, 60), _random_set(rng, 60)
        if gap_decompose(I, J).zero_gaps != len(set(I) & set(J)):
            bad += 1
    return _check("gap_identity", bad == 0, seed, {"pairs": 1000, "violations": bad})


def check_monotonicity(seed: int, fault: str) -> dict:
    disorder = normalize_power_law(2.5, 64)
    results = {}
    for theta in (0.1, 0.3, 1.0):
        rep = monotonicity_check(tilted_disorder_enumerate(disorder, 8, theta))
        results[repr(theta)] = rep.monotone
    return _check("monotonicity", all(results.values()), None, {"n": 8, "monotone": results})


def check_jensen(seed: int, fault: str) -> dict:
    law = normalize_power_law(0.6, 1000)
    disorder = normalize_power_law(2.5, 1000)
    beta, h = 0.5, -0.1
    est = quenched_free_energy_mc(law, disorder, beta, h, 1000, 16, seed)
    fa = annealed_free_energy(law, disorder, beta, h)
    return _check("jensen", est.value <= fa + 2.0 * est.stderr, seed,
                  {"quenched": est.value, "stderr": est.stderr, "annealed": fa})


def check_annealed_curve(seed: int, fault: str) -> dict:
    base = normalize_power_law(0.6, 2000)
    disorder = normalize_power_law(2.5, 2000)
    mu = disorder.mean()
    pair = fourier_pair(base, disorder)
    h0 = annealed_critical_point(base, disorder, 0.0)
    worst_rt, bound_ok = 0.0, True
    for beta in (0.1, 0.5, 1.0):
        hc = annealed_critical_point(base, disorder, beta)
        T = 1.0 / -math.expm1(-beta)
        worst_rt = max(worst_rt, abs(pair.I(hc) / T - 1.0))
        bound_ok &= hc <= -beta / mu
    ok = h0 == 0.0 and worst_rt <= 1e-9 and bound_ok
    return _check("annealed_curve", ok, None,
                  {"h_c_a_at_0": h0, "round_trip_rel_err": worst_rt, "below_minus_beta_over_mu_hat": bound_ok})


def check_beta0_sign(seed: int, fault: str) -> dict:
    grid = [(0.3, 0.3), (0.2, 0.5), (0.4, 0.4), (0.7, 0.7), (0.5, 1.3), (0.6, 2.5)]
    values, ok = {}, True
    for a, ah in grid:
        b0 = beta_zero(normalize_power_law(a, 2000), normalize_power_law(ah, 2000))
        values[f"{a!r},{ah!r}"] = b0
        ok &= (b0 > 0) == (a + ah < 1)
    return _check("beta0_sign", ok, None, {"beta0": values})


def check_homogeneous_exponent(seed: int, fault: str) -> dict:
    values, ok = {}, True
    for a in (0.5, 2.0):
        est = fit_homogeneous_exponent(normalize_power_law(a))
        target = max(1.0, 1.0 / a)
        values[repr(a)] = {"nu": est.value, "predicted": target}
        ok &= abs(est.value / target - 1.0) <= 0.05
    return _check("homogeneous_exponent", ok, None, values)


def check_homogeneous_expansion(seed: int, fault: str) -> dict:
    values, ok = {}, True
    for a in (1.5, 3.0):
        rep = free_energy_expansion_check(normalize_power_law(a), 1e-3)
        values[repr(a)] = rep.ratio
        ok &= abs(rep.ratio - 1.0) <= 0.1
    return _check("homogeneous_expansion", ok, None, {"ratio": values})


def check_fourier_inversion(seed: int, fault: str) -> dict:
    n, worst = 2000, 0.0
    for a, theta in itertools.product((1.5, 2.5), (0.0, 0.2)):
        law = normalize_power_law(a, 4096)
        conv = mass_by_convolution(law, n, theta)
        inv = mass_by_inversion(law, np.arange(n + 1), theta)
        worst = max(worst, float(np.abs(conv - inv).max()))
    return _check("fourier_inversion", worst < 1e-8, None, {"n_max": n, "max_abs_err": worst})


CHECKS: dict[str, Callable[[int, str], dict]] = {
    name: globals()[f"check_{name}"] for name in _INDEX
}


def run_verify(suite: str, seed: int, fault: str = "none", threads: int = 1) -> dict:
    """Run a suite and return the JSON-ready report; check order is fixed."""
    from .runner import parallel_map

    if suite not in (*SUITE_CHECKS, "all"):
        raise ValueError(f"unknown suite {suite!r}")
    suites = list(SUITE_CHECKS) if suite == "all" else [suite]
    names = [name for s in suites for name in SUITE_CHECKS[s]]
    checks = parallel_map(lambda name: CHECKS[name](seed, fault), names, threads)
    for s in suites:
        for c in checks:
            if c["name"] in SUITE_CHECKS[s]:
                c["suite"] = s
    return {
        "suite": suite,
        "seed": seed,
        "inject_fault": fault,
        "checks": checks,
        "passed": all(c["status"] == "pass" for c in checks),
    }
