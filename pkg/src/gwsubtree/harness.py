"""Monte Carlo experiments on conditioned trees.

Replicate ``i`` of an experiment at size ``n`` draws from the stream
``rng.child(n).child(i)``, so results depend only on the master seed and the
replicate plan.  Worker processes receive contiguous index blocks; outputs
are reassembled in index order and reduced with compensated sums, which
makes every report independent of the worker count.
"""

from __future__ import annotations

import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .errors import DegenerateSampleError
from .offspring import OffspringDistribution, heavy_tail, require_feasible
from .oracle import mu_product, theta_exact
from .patterns import as_pattern, node_tolls, path_pattern, star_pattern, tail_sums
from .rng import SeededRng
from .sampler import sample_conditioned

MIN_REPS = 100
DEGENERATE_SCALE_TOL = 0.05
BOOTSTRAP_RESAMPLES = 1000


def as_seeded(rng) -> SeededRng:
    if isinstance(rng, SeededRng):
        return rng
    if isinstance(rng, (int, np.integer)):
        return SeededRng(int(rng))
    raise TypeError("experiments need a SeededRng or an integer seed")


# -- replicate runner ------------------------------------------------------


def _run_block(task, rng: SeededRng, start: int, stop: int) -> list:
    return [task(rng.child(i).generator()) for i in range(start, stop)]


def map_replicates(task: Callable[[np.random.Generator], object], rng: SeededRng, reps: int,
                   workers: int = 1) -> list:
    """``task`` applied to each replicate stream, in replicate order."""
    if workers <= 1 or reps < 2 * workers:
        return _run_block(task, rng, 0, reps)
    blocks = 4 * workers
    edges = np.linspace(0, reps, blocks + 1).astype(int)
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        parts = pool.map(_run_block, [task] * blocks, [rng] * blocks, edges[:-1].tolist(), edges[1:].tolist())
        return [item for part in parts for item in part]


def run_replicates(task: Callable[[np.random.Generator], Sequence[float]], rng: SeededRng,
                   reps: int, workers: int = 1) -> np.ndarray:
    """Numeric replicate outputs as an array of shape (reps, k)."""
    return np.array(map_replicates(task, rng, reps, workers), dtype=np.float64).reshape(reps, -1)


def _count_task(gen, dist, pat, n):
    tree = sample_conditioned(dist, n, gen)
    tolls = node_tolls(pat, tree)
    return float(sum(int(x) for x in tolls) if tolls.dtype == object else tolls.sum()), float(tolls[0])


def _tail_task(gen, dist, pat, n, starts):
    return [float(x) for x in tail_sums(pat, sample_conditioned(dist, n, gen), starts)]


def _identity_task(gen, dist, pat, n):
    tree = sample_conditioned(dist, n, gen)
    return float(node_tolls(pat, tree).sum()), float(n - tree.root_degree - 1)


# -- summary statistics ----------------------------------------------------


def _fsum(x: np.ndarray) -> float:
    return math.fsum(x.tolist())


@dataclass(frozen=True)
class SampleStats:
    mean: float
    mean_se: float
    variance: float
    variance_se: float


def sample_stats(x: np.ndarray) -> SampleStats:
    """Unbiased mean and variance with standard errors; the variance SE uses
    the fourth central moment."""
    x = np.asarray(x, dtype=np.float64)
    r = x.size
    if r < 2:
        raise ValueError("need at least 2 replicates")
    mean = _fsum(x) / r
    dev = x - mean
    var = _fsum(dev * dev) / (r - 1)
    m4 = _fsum(dev ** 4) / r
    var_var = max(m4 - var * var * (r - 3) / (r - 1), 0.0) / r
    return SampleStats(mean, math.sqrt(var / r), var, math.sqrt(var_var))


def within_band(a: float, b: float, se_a: float, se_b: float, k: float = 3.0) -> bool:
    """Each value lies within k standard errors of the other."""
    return abs(a - b) <= k * min(se_a, se_b)


@dataclass(frozen=True)
class MomentReport:
    n: int
    reps: int
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    mean_over_n: float
    mean_over_n_se: float
    var_over_n: float
    var_over_n_se: float
    mu_n: float
    mu_n_se: float
    theta: float | None = None
    mu: float | None = None


def _moment_report(n, values, references, dist, pat) -> MomentReport:
    total = sample_stats(values[:, 0])
    root = sample_stats(values[:, 1])
    theta = mu = None
    if references:
        mu = mu_product(dist, pat)
        theta = theta_exact(dist, pat)
        theta = theta if math.isfinite(theta) else None
    return MomentReport(n, values.shape[0], total.mean, total.mean_se, total.variance, total.variance_se,
                        total.mean / n, total.mean_se / n, total.variance / n, total.variance_se / n,
                        root.mean, root.mean_se, theta, mu)


def mc_moments(dist: OffspringDistribution, pat, n: int, reps: int, rng, workers: int = 1,
               references: bool = False) -> MomentReport:
    """Sample moments of N_t(T_n) and of the root toll over ``reps`` trees."""
    if reps < MIN_REPS:
        raise ValueError(f"need at least {MIN_REPS} replicates")
    require_feasible(dist, n)
    pat = as_pattern(pat)
    values = run_replicates(partial(_count_task, dist=dist, pat=pat, n=n), as_seeded(rng).child(n),
                            reps, workers)
    return _moment_report(n, values, references, dist, pat)


# -- experiments -----------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    mu_n: float
    mu_n_se: float
    gap: float


@dataclass(frozen=True)
class ConvergenceReport:
    theta: float
    rows: tuple[ConvergenceRow, ...]
    exponent: float

    @property
    def gaps_decreasing(self) -> bool:
        g = [abs(r.gap) for r in self.rows]
        return all(b < a for a, b in zip(g, g[1:]))


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y on log x over the points with y > 0."""
    pts = [(math.log(x), math.log(y)) for x, y in zip(xs, ys) if y > 0]
    if len(pts) < 2:
        return math.nan
    return float(np.polyfit([p[0] for p in pts], [p[1] for p in pts], 1)[0])


def mu_n_convergence(dist: OffspringDistribution, pat, ns: Sequence[int], reps: int, rng,
                     theta: float | None = None, workers: int = 1) -> ConvergenceReport:
    """Root-toll means against theta, with the fitted log-log decay exponent of the gap."""
    pat = as_pattern(pat)
    if list(ns) != sorted(set(ns)):
        raise ValueError("sizes must be strictly increasing")
    if theta is None:
        theta = theta_exact(dist, pat)
    if not math.isfinite(theta):
        raise ValueError("theta unavailable; estimate it with theta_kesten and pass it in")
    rows = []
    for n in ns:
        rep = mc_moments(dist, pat, n, reps, rng, workers)
        rows.append(ConvergenceRow(n, rep.mu_n, rep.mu_n_se, rep.mu_n - theta))
    slope = loglog_slope([r.n for r in rows], [abs(r.gap) for r in rows])
    return ConvergenceReport(theta, tuple(rows), slope)


@dataclass(frozen=True)
class VarianceScan:
    rows: tuple[MomentReport, ...]

    @property
    def stabilized(self) -> bool:
        if len(self.rows) < 2:
            return False
        a, b = self.rows[-2], self.rows[-1]
        return within_band(a.var_over_n, b.var_over_n, a.var_over_n_se, b.var_over_n_se)


def variance_scan(dist: OffspringDistribution, pat, ns: Sequence[int], reps: int, rng,
                  workers: int = 1) -> VarianceScan:
    return VarianceScan(tuple(mc_moments(dist, pat, n, reps, rng, workers) for n in ns))


@dataclass(frozen=True)
class NormalityReport:
    ks: float
    skewness: float
    excess_kurtosis: float
    center: float
    scale: float
    reps: int
    n: int | None = None
    var_over_n: float | None = None
    degenerate_scale: bool = False


def normality_of_sample(values, center: float | None = None, scale: float | None = None,
                        n: int | None = None, scale_tol: float = DEGENERATE_SCALE_TOL) -> NormalityReport:
    """KS distance to N(0,1), skewness and excess kurtosis after standardizing.

    ``center`` and ``scale`` default to the sample mean and SD.  With ``n``
    given, the report flags a spread that does not grow like sqrt(n)
    (sample variance / n below ``scale_tol``).
    """
    x = np.asarray(values, dtype=np.float64)
    st = sample_stats(x)
    if st.variance == 0.0:
        raise DegenerateSampleError("all replicates are equal; the sample cannot be standardized")
    center = st.mean if center is None else center
    scale = math.sqrt(st.variance) if scale is None else scale
    z = (x - center) / scale
    ks = float(stats.kstest(z, "norm").statistic)
    var_n = st.variance / n if n else None
    return NormalityReport(ks, float(stats.skew(z)), float(stats.kurtosis(z)), center, scale, x.size,
                           n, var_n, bool(var_n is not None and var_n < scale_tol))


def normality_test(dist: OffspringDistribution, pat, n: int, reps: int, rng,
                   standardization: str = "self", workers: int = 1) -> NormalityReport:
    """Distance of the standardized N_t(T_n) from the standard normal.

    ``self`` centers and scales by the sample mean and SD; ``oracle`` centers
    at mu * n (still scaled by the sample SD, as gamma has no closed form).
    """
    if reps < 2000:
        raise ValueError("normality diagnostics need at least 2000 replicates")
    require_feasible(dist, n)
    pat = as_pattern(pat)
    values = run_replicates(partial(_count_task, dist=dist, pat=pat, n=n), as_seeded(rng).child(n),
                            reps, workers)[:, 0]
    if standardization == "self":
        center = None
    elif standardization == "oracle":
        center = mu_product(dist, pat) * n
    else:
        raise ValueError(f"unknown standardization {standardization!r}")
    return normality_of_sample(values, center=center, n=n)


@dataclass(frozen=True)
class TruncationRow:
    p: int
    mean: float
    var_over_n: float
    var_over_n_se: float


@dataclass(frozen=True)
class TruncationReport:
    n: int
    rows: tuple[TruncationRow, ...]

    @property
    def weakly_decreasing(self) -> bool:
        return all(b.var_over_n <= a.var_over_n + 3 * max(a.var_over_n_se, b.var_over_n_se)
                   for a, b in zip(self.rows, self.rows[1:]))

    @property
    def final_ratio(self) -> float:
        first = self.rows[0].var_over_n
        return self.rows[-1].var_over_n / first if first else math.nan


def truncation_decay(dist: OffspringDistribution, pat, n: int, p_list: Sequence[int], reps: int, rng,
                     workers: int = 1) -> TruncationReport:
    """Var(F_{p,inf}(T_n)) / n for each truncation start p, from shared trees."""
    p_list = list(p_list)
    if reps < MIN_REPS:
        raise ValueError(f"need at least {MIN_REPS} replicates")
    if not p_list or p_list[0] != 1 or p_list != sorted(set(p_list)):
        raise ValueError("truncation starts must increase and begin at 1")
    require_feasible(dist, n)
    pat = as_pattern(pat)
    values = run_replicates(partial(_tail_task, dist=dist, pat=pat, n=n, starts=tuple(p_list)),
                            as_seeded(rng).child(n), reps, workers)
    rows = []
    for j, p in enumerate(p_list):
        st = sample_stats(values[:, j])
        rows.append(TruncationRow(p, st.mean, st.variance / n, st.variance_se / n))
    return TruncationReport(n, tuple(rows))


# -- heavy tails -----------------------------------------------------------


HEAVY_TAIL_SETUPS = {
    1: (3.0, path_pattern(3)),
    2: (6.0, star_pattern(3)),
}


@dataclass(frozen=True)
class HeavyTailRow:
    n: int
    variance: float
    variance_se: float
    var_over_n: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class HeavyTailReport:
    example: int
    dist: str
    pattern: str
    rows: tuple[HeavyTailRow, ...]
    identity_holds: bool | None = None
    min_step_growth: float = 1.25

    @property
    def var_increasing(self) -> bool:
        """Variance at the largest size exceeds the variance at the smallest."""
        return self.rows[-1].variance > self.rows[0].variance

    @property
    def var_over_n_nonincreasing(self) -> bool:
        return self.rows[-1].var_over_n <= self.rows[0].var_over_n

    @property
    def growth_factors(self) -> list[float]:
        return [b.var_over_n / a.var_over_n for a, b in zip(self.rows, self.rows[1:])]

    @property
    def superlinear(self) -> bool:
        return all(g >= self.min_step_growth for g in self.growth_factors)

    @property
    def intervals_disjoint(self) -> bool:
        return all(b.ci_low > a.ci_high for a, b in zip(self.rows, self.rows[1:]))


def bootstrap_interval(x: np.ndarray, gen: np.random.Generator, resamples: int = BOOTSTRAP_RESAMPLES,
                       level: float = 0.95) -> tuple[float, float]:
    """Percentile interval for the sample variance."""
    idx = gen.integers(0, x.size, size=(resamples, x.size))
    boot = x[idx].var(axis=1, ddof=1)
    lo, hi = np.quantile(boot, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def heavy_tail_experiment(example: int, ns: Sequence[int], reps: int, rng, workers: int = 1,
                          dist: OffspringDistribution | None = None) -> HeavyTailReport:
    """Variance growth for the two heavy-tailed setups.

    Example 1 (beta = 3, 3-node path) also checks N_t = n - w_1 - 1 on every
    sampled tree; example 2 uses beta = 6 with the 3-leaf star.
    """
    if example not in HEAVY_TAIL_SETUPS:
        raise ValueError("example must be 1 or 2")
    if reps < MIN_REPS:
        raise ValueError(f"need at least {MIN_REPS} replicates")
    beta, pat = HEAVY_TAIL_SETUPS[example]
    dist = heavy_tail(beta) if dist is None else dist
    base = as_seeded(rng)
    rows = []
    identity = True
    for n in ns:
        require_feasible(dist, n)
        task = partial(_identity_task if example == 1 else _count_task, dist=dist, pat=pat, n=n)
        values = run_replicates(task, base.child(n), reps, workers)
        if example == 1:
            identity &= bool(np.array_equal(values[:, 0], values[:, 1]))
        x = values[:, 0]
        st = sample_stats(x)
        lo, hi = bootstrap_interval(x, base.child(n).generator())
        rows.append(HeavyTailRow(n, st.variance, st.variance_se, st.variance / n, lo / n, hi / n))
    return HeavyTailReport(example, f"heavytail:beta={beta:g}", str(pat), tuple(rows),
                           identity if example == 1 else None)
