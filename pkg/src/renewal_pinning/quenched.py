"""Quenched partition functions, Monte Carlo free energies and tilted disorder measures."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .homogeneous import homogeneous_pinned_log_partition
from .renewal_core import (
    DisorderPath,
    RenewalLaw,
    StationaryDelay,
    sample_path,
    seed_stream,
)


def _log_K(law: RenewalLaw, n: int) -> np.ndarray:
    if n > law.horizon:
        raise ValueError("n beyond the law's horizon")
    out = np.full(n + 1, -np.inf)
    with np.errstate(divide="ignore"):
        out[1:] = np.log(law.pmf[1 : n + 1])
    return out


def _pinned_dp(logK: np.ndarray, site: np.ndarray) -> np.ndarray:
    """log Z^c(m), m = 0..n, for each row of ``site`` (the log reward at each m)."""
    P, n1 = site.shape
    logz = np.full((P, n1), -np.inf)
    logz[:, 0] = 0.0
    rev = logK[::-1]  # rev[n - d] = logK(d)
    n = n1 - 1
    for m in range(1, n1):
        v = logz[:, :m] + rev[n - m : n]  # logK(m - j) for j = 0..m-1
        top = v.max(axis=1, keepdims=True)
        logz[:, m] = top[:, 0] + np.log(np.exp(v - top).sum(axis=1)) + site[:, m]
    return logz


def _lse(v: np.ndarray) -> float:
    top = float(np.max(v))
    if top == -math.inf:
        return top
    return top + math.log(float(np.exp(v - top).sum()))


@dataclass
class LogPartitionTable:
    logZ_pinned: np.ndarray
    beta: float
    h: float
    disorder: DisorderPath = field(repr=False)
    law: RenewalLaw = field(repr=False)
    offset: int = 0

    @property
    def n(self) -> int:
        return self.logZ_pinned.size - 1

    def log_free(self, m: int | None = None) -> float:
        """log of the free-endpoint partition function on [0, m]."""
        m = self.n if m is None else m
        surv = self.law.survival(m)
        with np.errstate(divide="ignore"):
            ls = np.log(surv[m::-1])  # P(tau_1 > m - j), j = 0..m
        return _lse(self.logZ_pinned[: m + 1] + ls)


def _site_rewards(disorder: DisorderPath, params: Sequence[tuple[float, float]], n: int,
                  offset: int = 0) -> np.ndarray:
    d = disorder.indicator(offset + n)[offset:].astype(float)
    out = np.empty((len(params), n + 1))
    for i, (beta, h) in enumerate(params):
        out[i] = h + beta * d
    out[:, 0] = 0.0
    return out


def quenched_partition_dp(disorder: DisorderPath, law: RenewalLaw, beta: float, h: float,
                          n: int, offset: int = 0) -> LogPartitionTable:
    """Pinned log Z^c(m) = log sum_j Z^c(j) K(m-j) e^{h + beta delta_hat_m}, m <= n.

    ``offset`` runs the recursion on the block [offset, offset + n] of the disorder.
    """
    if offset + n > disorder.window:
        raise ValueError("n beyond the disorder window")
    logz = _pinned_dp(_log_K(law, n), _site_rewards(disorder, [(beta, h)], n, offset))[0]
    return LogPartitionTable(logz, beta, h, disorder, law, offset)


def quenched_partition_grid(disorder: DisorderPath, law: RenewalLaw,
                            params: Sequence[tuple[float, float]], n: int) -> list[LogPartitionTable]:
    """The pinned tables for several (beta, h) on a shared disorder path, in one sweep."""
    if n > disorder.window:
        raise ValueError("n beyond the disorder window")
    logz = _pinned_dp(_log_K(law, n), _site_rewards(disorder, params, n))
    return [LogPartitionTable(logz[i], b, h, disorder, law) for i, (b, h) in enumerate(params)]


# ---------------------------------------------------------------------------
# Monte Carlo over disorder
# ---------------------------------------------------------------------------


def jackknife(values: np.ndarray, stat: Callable[[np.ndarray], float] = np.mean) -> tuple[float, float]:
    """Leave-one-out jackknife estimate and standard error of ``stat`` over rows."""
    values = np.asarray(values)
    R = values.shape[0]
    full = float(stat(values))
    loo = np.array([stat(np.delete(values, i, axis=0)) for i in range(R)])
    se = math.sqrt((R - 1) / R * float(((loo - loo.mean()) ** 2).sum()))
    return full, se


@dataclass(frozen=True)
class QuenchedEstimate:
    beta: float
    h: float
    n: int
    value: float
    stderr: float
    half_value: float  # the same estimator at n/2
    half_stderr: float
    replicas: int
    seed: int
    samples: np.ndarray = field(repr=False)

    @property
    def drift(self) -> float:
        """Convergence diagnostic: estimate at n minus estimate at n/2."""
        return self.value - self.half_value

    def csv_row(self) -> str:
        return (f"{self.n},{self.beta!r},{self.h!r},{self.value!r},{self.stderr!r},"
                f"{self.replicas},{self.seed}")


CSV_HEADER = "n,beta,h,logZ_mean,stderr,replicas,seed"


def _replica(law, disorder_law, params, n, seed, r, delay):
    path = sample_path(disorder_law, n, seed, delay=delay, rng=seed_stream(seed, r))
    tables = quenched_partition_grid(path, law, params, n)
    half = n // 2
    return [(t.log_free(n) / n, t.log_free(half) / half) for t in tables]


def quenched_free_energy_grid(law: RenewalLaw, disorder_law: RenewalLaw,
                              params: Sequence[tuple[float, float]], n: int, replicas: int,
                              seed: int, threads: int = 1,
                              delay: StationaryDelay | None = None) -> list[QuenchedEstimate]:
    """(1/n) log Z_free averaged over independent disorder paths, for several (beta, h).

    Replica r always uses the stream seed_stream(seed, r), whatever the thread count,
    and all parameter points share the same disorder paths.
    """
    if replicas < 16:
        raise ValueError("at least 16 replicas are required")
    if n < 2:
        raise ValueError("n must be at least 2")
    params = [(float(b), float(h)) for b, h in params]
    job = lambda r: _replica(law, disorder_law, params, n, seed, r, delay)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(job, range(replicas)))
    else:
        rows = [job(r) for r in range(replicas)]
    data = np.array(rows)  # (replicas, params, 2)
    out = []
    for i, (b, h) in enumerate(params):
        v, se = jackknife(data[:, i, 0])
        hv, hse = jackknife(data[:, i, 1])
        out.append(QuenchedEstimate(b, h, n, v, se, hv, hse, replicas, seed, data[:, i, 0].copy()))
    return out


def quenched_free_energy_mc(law: RenewalLaw, disorder_law: RenewalLaw, beta: float, h: float,
                            n: int, replicas: int, seed: int, threads: int = 1,
                            delay: StationaryDelay | None = None) -> QuenchedEstimate:
    return quenched_free_energy_grid(law, disorder_law, [(beta, h)], n, replicas, seed,
                                     threads, delay)[0]


# ---------------------------------------------------------------------------
# tilted disorder measures by enumeration
# ---------------------------------------------------------------------------

MAX_ENUMERATION = 20


@dataclass(frozen=True)
class TiltedDisorderMeasure:
    """P_hat_{n,theta} on configurations of [1, n] with eta_n = 1.

    Configuration ``masks[i]`` has bit k-1 set when k is a renewal point.
    """

    n: int
    theta: float
    masks: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    log_normalizer: float
    law: RenewalLaw = field(repr=False)

    def marginal(self) -> np.ndarray:
        """P_hat_{n,theta}(k in tau_hat) for k = 0..n."""
        out = np.zeros(self.n + 1)
        out[0] = 1.0
        for k in range(1, self.n + 1):
            out[k] = self.weights[(self.masks >> (k - 1)) & 1 == 1].sum()
        return out


def _config_log_weights(law: RenewalLaw, n: int, theta: float) -> tuple[np.ndarray, np.ndarray]:
    free = n - 1
    rest = np.arange(2**free, dtype=np.int64)
    masks = rest | (1 << (n - 1))
    logK = _log_K(law, n)
    logw = np.zeros(masks.size)
    last = np.zeros(masks.size, dtype=np.int64)
    for k in range(1, n + 1):
        on = ((masks >> (k - 1)) & 1).astype(bool)
        logw[on] += logK[k - last[on]] + theta
        last[on] = k
    return masks, logw


def tilted_disorder_enumerate(disorder_law: RenewalLaw, n: int, theta: float) -> TiltedDisorderMeasure:
    """Exact weights proportional to e^{theta sum eta} prod K_hat(gaps), pinned at n."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > MAX_ENUMERATION:
        raise ValueError(f"enumeration is limited to n <= {MAX_ENUMERATION}")
    masks, logw = _config_log_weights(disorder_law, n, theta)
    top = logw.max()
    w = np.exp(logw - top)
    total = math.fsum(w)
    return TiltedDisorderMeasure(n, float(theta), masks, w / total, top + math.log(total), disorder_law)


def tilted_normalizer(disorder_law: RenewalLaw, n: int, theta: float) -> float:
    """log Z_hat_{n,theta} from the homogeneous pinned recursion."""
    return float(homogeneous_pinned_log_partition(disorder_law, theta, n)[n])


@dataclass(frozen=True)
class MonotonicityReport:
    monotone: bool
    witness: tuple[int, int, int] | None  # (k, eta mask, eta' mask) with eta <= eta'
    worst_gap: float


def _conditional_table(measure: TiltedDisorderMeasure, k: int) -> np.ndarray:
    """P(eta_k = 1 | rest) indexed by the rest compressed to n-2 free bits."""
    n = measure.n
    w = np.zeros(2 ** n)
    w[measure.masks] = measure.weights
    others = [j for j in range(1, n) if j != k]
    m = len(others)
    idx = np.arange(2**m, dtype=np.int64)
    full = np.full(idx.size, 1 << (n - 1), dtype=np.int64)
    for b, j in enumerate(others):
        full |= ((idx >> b) & 1) << (j - 1)
    on = w[full | (1 << (k - 1))]
    off = w[full]
    return on / (on + off)


def monotonicity_check(measure: TiltedDisorderMeasure, slack: float = 1e-12) -> MonotonicityReport:
    """Check the conditional-probability inequality for all k and all eta <= eta'.

    For each k the largest conditional over all sub-configurations of eta' is
    built by a subset-max transform, so every comparable pair is covered.
    """
    n = measure.n
    worst = 0.0
    for k in range(1, n):
        c = _conditional_table(measure, k)
        m = n - 2
        best = c.copy()
        arg = np.arange(c.size, dtype=np.int64)
        for b in range(m):
            bit = 1 << b
            hi = (np.arange(c.size) & bit) != 0
            src = np.arange(c.size)[hi] ^ bit
            take = best[src] > best[hi]
            idx = np.nonzero(hi)[0]
            best[idx[take]] = best[src[take]]
            arg[idx[take]] = arg[src[take]]
        gap = best - c  # > 0 means a smaller configuration has a larger conditional
        i = int(np.argmax(gap))
        worst = max(worst, float(gap[i]))
        if gap[i] > slack:
            return MonotonicityReport(False, (k, _expand(int(arg[i]), k, n), _expand(i, k, n)), worst)
    return MonotonicityReport(True, None, worst)


def _expand(compressed: int, k: int, n: int) -> int:
    others = [j for j in range(1, n) if j != k]
    full = 1 << (n - 1)
    for b, j in enumerate(others):
        if (compressed >> b) & 1:
            full |= 1 << (j - 1)
    return full


# ---------------------------------------------------------------------------
# tilting versus shifting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TiltShiftReport:
    theta: float
    tilted: float
    tilted_stderr: float
    untilted: float
    untilted_stderr: float
    shifted: dict[float, tuple[float, float]]  # c -> (F_n(beta, h + c beta theta; 0), stderr)
    diff: float  # tilted - untilted, paired
    diff_stderr: float

    @property
    def ordering_observed(self) -> bool:
        return self.diff >= 0.0


def _snis(logw: np.ndarray, f: np.ndarray) -> float:
    w = np.exp(logw - logw.max())
    return float((w * f).sum() / w.sum())


def tilt_vs_shift_probe(law: RenewalLaw, disorder_law: RenewalLaw, beta: float, h: float,
                        theta: float, n: int, replicas: int, seed: int,
                        c_values: Sequence[float] = (0.1, 1.0)) -> TiltShiftReport:
    """Compare F_n(beta, h; theta) with F_n(beta, h; 0) and F_n(beta, h + c beta theta; 0).

    Disorder is drawn from P_hat and reweighted by e^{theta |tau_hat cap [1,n]|} delta_hat_n
    with self-normalized importance weights; all quantities share the same paths.
    """
    mu = disorder_law.mean()
    if not math.isfinite(mu) or (disorder_law.tail_exponent is not None
                                 and disorder_law.tail_exponent <= 1.0):
        raise ValueError("requires alpha_hat > 1")
    if replicas < 16:
        raise ValueError("at least 16 replicas are required")
    params = [(beta, h)] + [(beta, h + c * beta * theta) for c in c_values]
    pinned, counts, vals = [], [], []
    for r in range(replicas):
        path = sample_path(disorder_law, n, seed, rng=seed_stream(seed, r))
        if n not in path:
            continue
        tables = quenched_partition_grid(path, law, params, n)
        counts.append(int(np.count_nonzero(path.hits[(path.hits >= 1) & (path.hits <= n)])))
        vals.append([t.logZ_pinned[n] / n for t in tables])
        pinned.append(r)
    if len(vals) < 16:
        raise RuntimeError("too few paths pinned at n; raise replicas")
    cnt = np.array(counts, dtype=float)
    V = np.array(vals)
    both = np.column_stack([cnt, V])

    def tilted_stat(rows):
        return _snis(theta * rows[:, 0], rows[:, 1])

    def plain_stat(rows):
        return float(rows[:, 1].mean())

    def diff_stat(rows):
        return tilted_stat(rows) - plain_stat(rows)

    t, tse = jackknife(both, tilted_stat)
    u, use = jackknife(both, plain_stat)
    d, dse = jackknife(both, diff_stat)
    shifted = {}
    for j, c in enumerate(c_values):
        shifted[float(c)] = jackknife(V[:, j + 1])
    return TiltShiftReport(theta, t, tse, u, use, shifted, d, dse)
