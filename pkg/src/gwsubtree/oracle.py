"""Exact reference values at small sizes, and exact limits where available.

Everything here is computed without random numbers: exhaustive enumeration
of plane trees for the conditioned laws, closed products for the
unconditioned toll mean ``mu``, a recursion for the Kesten-tree toll mean
``theta``, and power series for ``E[n_t(T); |T| = k]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import comb, zeta

from ._kernels import batch_counts
from .errors import InfeasibleSizeError, OracleTooLargeError, PrecisionError
from .offspring import OffspringDistribution, require_feasible, require_valid, size_biased, validate
from .patterns import Pattern, as_pattern, toll_count
from .rng import as_generator
from .sampler import sample_kesten
from .trees import OrderedTree

MAX_ENUMERATION = 16
_CHUNK = 1 << 18


# -- enumeration -----------------------------------------------------------


def enumerate_degree_sequences(n: int) -> np.ndarray:
    """All preorder outdegree sequences of n-node plane trees, lexicographically
    ordered, as an int8 array of shape (Catalan(n-1), n)."""
    if not 1 <= n <= MAX_ENUMERATION:
        raise OracleTooLargeError(f"enumeration supports 1 <= n <= {MAX_ENUMERATION}, got {n}")
    rows = np.zeros((1, 0), dtype=np.int8)
    walk = np.zeros(1, dtype=np.int64)
    for j in range(n):
        if j == n - 1:
            lo = np.zeros_like(walk)
            hi = -walk
        else:
            lo = np.maximum(0, 1 - walk)
            hi = n - j - 1 - walk
        counts = hi - lo + 1
        counts[counts < 0] = 0
        total = int(counts.sum())
        parent = np.repeat(np.arange(rows.shape[0]), counts)
        first = np.concatenate([[0], np.cumsum(counts)[:-1]])
        d = np.repeat(lo, counts) + (np.arange(total) - np.repeat(first, counts))
        rows = np.concatenate([rows[parent], d[:, None].astype(np.int8)], axis=1)
        walk = walk[parent] + d - 1
    return rows


def enumerate_trees(n: int) -> list[OrderedTree]:
    """All plane trees with n nodes, in lexicographic order of outdegree sequence."""
    return [OrderedTree(row, check=False) for row in enumerate_degree_sequences(n)]


def catalan(m: int) -> int:
    return math.comb(2 * m, m) // (m + 1)


def tree_weight(dist: OffspringDistribution, tree: OrderedTree) -> float:
    """Unconditioned probability P(T = tree) = prod over nodes of p(outdegree)."""
    pmf = dist.pmf_array(int(tree.degrees.max()))
    return float(np.prod(pmf[tree.degrees]))


def sequence_weights(dist: OffspringDistribution, seqs: np.ndarray) -> np.ndarray:
    n = seqs.shape[1]
    pmf = dist.pmf_array(n)
    out = np.empty(seqs.shape[0])
    for s in range(0, seqs.shape[0], _CHUNK):
        out[s:s + _CHUNK] = np.prod(pmf[seqs[s:s + _CHUNK]], axis=1)
    return out


@dataclass(frozen=True, eq=False)
class ExactLaw:
    """The law of the conditioned tree T_n, restricted to its support."""

    n: int
    sequences: np.ndarray
    probs: np.ndarray
    dist: OffspringDistribution
    total_weight: float

    def __len__(self):
        return self.sequences.shape[0]

    @property
    def trees(self) -> list[OrderedTree]:
        return [OrderedTree(s, check=False) for s in self.sequences]

    def items(self):
        for s, p in zip(self.sequences, self.probs):
            yield OrderedTree(s, check=False), float(p)

    def probability(self, tree: OrderedTree) -> float:
        if len(tree) != self.n:
            return 0.0
        hit = np.flatnonzero((self.sequences == tree.degrees.astype(np.int8)).all(axis=1))
        return float(self.probs[hit[0]]) if hit.size else 0.0


def exact_conditioned_law(dist: OffspringDistribution, n: int) -> ExactLaw:
    require_feasible(dist, n)
    seqs = enumerate_degree_sequences(n)
    w = sequence_weights(dist, seqs)
    keep = w > 0
    total = math.fsum(w[keep])
    if total <= 0:
        raise InfeasibleSizeError(f"no {n}-node tree has positive probability")
    return ExactLaw(n, seqs[keep], w[keep] / total, dist, total)


def _pattern_arrays(pat: Pattern):
    return pat._arrays


def _law_counts(law: ExactLaw, pat: Pattern):
    root, total, over = batch_counts(law.sequences, *_pattern_arrays(pat))
    if over:
        raise OracleTooLargeError("counts exceed 64-bit range during enumeration")
    return root, total


@dataclass(frozen=True)
class ExactMoments:
    n: int
    mean: float
    variance: float
    histogram: dict[int, float] = field(default_factory=dict)


def _moments(values: np.ndarray, probs: np.ndarray) -> tuple[float, float]:
    mean = math.fsum(probs * values)
    var = math.fsum(probs * (values - mean) ** 2)
    return mean, max(var, 0.0)


def exact_moments(dist: OffspringDistribution, pat, n: int) -> ExactMoments:
    """Mean, variance and full value histogram of ``N_t(T_n)``."""
    pat = as_pattern(pat)
    law = exact_conditioned_law(dist, n)
    _, total = _law_counts(law, pat)
    mean, var = _moments(total.astype(np.float64), law.probs)
    values, inverse = np.unique(total, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    groups = np.split(law.probs[order], np.cumsum(np.bincount(inverse))[:-1])
    return ExactMoments(n, mean, var, {int(v): math.fsum(g.tolist()) for v, g in zip(values, groups)})


def exact_toll_mean(dist: OffspringDistribution, pat, k: int) -> float:
    pat = as_pattern(pat)
    law = exact_conditioned_law(dist, k)
    root, _ = _law_counts(law, pat)
    return math.fsum(law.probs * root)


def mu_k_table(dist: OffspringDistribution, pat, k_max: int) -> dict[int, float]:
    """Exact ``mu_k = E n_t(T_k)`` for every feasible k <= k_max."""
    if k_max > MAX_ENUMERATION:
        raise OracleTooLargeError(f"k_max must be <= {MAX_ENUMERATION}")
    report = validate(dist)
    return {k: exact_toll_mean(dist, pat, k) for k in range(1, k_max + 1) if report.feasible_size(k)}


# -- power series ----------------------------------------------------------


class _Series:
    """Truncated power series arithmetic modulo z^n via real FFTs."""

    def __init__(self, n: int):
        self.n = n
        self.fft_len = 1 << (2 * n - 1).bit_length()

    def mul(self, a, b):
        L = self.fft_len
        return np.fft.irfft(np.fft.rfft(a, L) * np.fft.rfft(b, L), L)[:self.n]

    def compose(self, coeffs, y):
        """sum_j coeffs[j] y^j for y with zero constant term (Horner)."""
        n, L = self.n, self.fft_len
        J = min(len(coeffs) - 1, n - 1)
        fy = np.fft.rfft(y, L)
        res = np.zeros(n)
        res[0] = coeffs[J]
        for j in range(J - 1, -1, -1):
            res = np.fft.irfft(np.fft.rfft(res, L) * fy, L)[:n]
            res[0] += coeffs[j]
        return res

    def inverse(self, g):
        h = np.array([1.0 / g[0]])
        m = 1
        while m < self.n:
            m = min(2 * m, self.n)
            sub = _Series(m)
            gh = sub.mul(g[:m], h)
            h = sub.mul(h, np.concatenate([[2.0 - gh[0]], -gh[1:]]))
        return h

    @staticmethod
    def shift(a):
        """Multiply by z (dropping the top coefficient)."""
        return np.concatenate([[0.0], a[:-1]])


@lru_cache(maxsize=16)
def _size_series(dist: OffspringDistribution, n: int) -> np.ndarray:
    """Coefficients of the size generating function Y(z) = z phi(Y(z)) mod z^n."""
    pmf = dist.pmf_array(n)
    dpmf = np.arange(1, n + 1) * pmf[1:n + 1]
    y = np.zeros(2)
    y[1] = pmf[0]
    m = 2
    while True:
        m_next = min(2 * m, n)
        ops = _Series(m_next)
        y = np.concatenate([y, np.zeros(m_next - y.size)])
        phi = ops.compose(pmf[:m_next], y)
        dphi = ops.compose(dpmf[:m_next], y)
        resid = y - ops.shift(phi)
        jac = -ops.shift(dphi)
        jac[0] += 1.0
        y = y - ops.mul(resid, ops.inverse(jac))
        if m_next == n and m == n:
            break
        m = m_next
    return y


def size_series(dist: OffspringDistribution, kmax: int) -> np.ndarray:
    """``pi_k`` for k = 0..kmax from the generating function."""
    return _size_series(dist, kmax + 1).copy()


def toll_size_series(dist: OffspringDistribution, pat, kmax: int) -> np.ndarray:
    """``E[n_t(T); |T| = k]`` for k = 0..kmax.

    With Y the size series, A_leaf = Y and for a node with d children
    A = z * (sum_i p_{i+d} C(i+d, d) Y^i) * prod_children A_child.
    """
    require_valid(dist)
    pat = as_pattern(pat)
    n = kmax + 1
    ops = _Series(n)
    y = _size_series(dist, n)
    pmf = dist.pmf_array(n + pat.max_degree)
    memo: dict[str, np.ndarray] = {}

    def series(shape: OrderedTree) -> np.ndarray:
        key = shape.serialize()
        if key in memo:
            return memo[key]
        d = shape.root_degree
        if d == 0:
            out = y
        else:
            i = np.arange(n)
            coeffs = pmf[d:d + n] * comb(i + d, d)
            out = ops.compose(coeffs, y)
            for branch in shape.branches():
                out = ops.mul(out, series(branch))
            out = ops.shift(out)
        memo[key] = out
        return out

    return series(pat.shape).copy()


def mu_k_series(dist: OffspringDistribution, pat, kmax: int) -> dict[int, float]:
    """``mu_k`` for feasible k <= kmax from the power series (no enumeration)."""
    a = toll_size_series(dist, pat, kmax)
    pi = size_series(dist, kmax)
    return {k: float(a[k] / pi[k]) for k in range(1, kmax + 1) if pi[k] > 1e-300}


# -- mu and theta ----------------------------------------------------------


def mu_product(dist: OffspringDistribution, pat) -> float:
    """``E n_t(T) = prod over pattern nodes of E C(xi, d_v)``."""
    pat = as_pattern(pat)
    return float(math.prod(dist.binomial_moment(int(d)) for d in pat.shape.degrees))


@dataclass(frozen=True)
class MuResult:
    value: float
    product: float
    series: float
    head: float
    tail: float
    tail_error: float
    kmax: int


def _tail_fit(a: np.ndarray, span: int, kmax: int, terms: int, start: int) -> float:
    """Fit a_k k^{3/2} on a polynomial in k^{-1/2} over the lattice in
    [start, kmax], then sum the fitted terms beyond kmax with Hurwitz zeta."""
    ks = np.arange(1 + span * math.ceil((start - 1) / span), kmax + 1, span)
    ks = ks[ks >= start]
    powers = 1.5 + 0.5 * np.arange(terms)
    design = ks[:, None].astype(np.float64) ** (-powers[None, :])
    coef, *_ = np.linalg.lstsq(design, a[ks], rcond=None)
    k0 = ks[-1] + span
    return float(sum(c * span ** (-s) * zeta(s, k0 / span) for c, s in zip(coef, powers)))


def mu_unconditioned(dist: OffspringDistribution, pat, kmax: int = 2048,
                     tol: float = 1e-6) -> MuResult:
    """``mu = E n_t(T)`` by two routes that must agree within ``tol``.

    The product formula is compared with sum_k pi_k mu_k, summed exactly to
    ``kmax`` from the generating function and completed with a fitted
    k^{-3/2} tail.
    """
    pat = as_pattern(pat)
    require_valid(dist)
    if not math.isfinite(dist.raw_moment(pat.max_degree + 1)):
        raise PrecisionError("E xi^(Delta+1) is infinite; the toll mean series need not converge")
    product = mu_product(dist, pat)
    a = toll_size_series(dist, pat, kmax)
    head = math.fsum(a.tolist())
    span = dist.span
    fits = [_tail_fit(a, span, kmax, terms, start)
            for terms, start in ((6, kmax // 4), (5, kmax // 4), (6, kmax // 2))]
    tail = fits[0]
    tail_err = max(abs(f - tail) for f in fits[1:])
    series = head + tail
    result = MuResult(product, product, series, head, tail, tail_err, kmax)
    if abs(series - product) > tol or tail_err > tol:
        raise PrecisionError(
            f"product {product!r} and series {series!r} differ by {abs(series - product):.3g} "
            f"(tail uncertainty {tail_err:.3g}, tolerance {tol:g})")
    return result


def theta_exact(dist: OffspringDistribution, pat) -> float:
    """``theta = E n_t(T-hat)`` through the spine decomposition at the root.

    The root of the Kesten tree has a size-biased number of children, one of
    them (uniform) special.  Conditioning on which branch hosts the spine:

        theta(t) = E[xi C(xi,d)] prod_j mu(t_j)
                   + E[C(xi,d)] sum_j (theta(t_j) - mu(t_j)) prod_{j' != j} mu(t_j')
    """
    pat = as_pattern(pat)
    biased = size_biased(dist)
    memo: dict[str, tuple[float, float]] = {}

    def rec(shape: OrderedTree) -> tuple[float, float]:
        key = shape.serialize()
        if key in memo:
            return memo[key]
        d = shape.root_degree
        if d == 0:
            memo[key] = (1.0, 1.0)
            return memo[key]
        parts = [rec(b) for b in shape.branches()]
        mus = [m for m, _ in parts]
        mu = dist.binomial_moment(d) * math.prod(mus)
        spread = 0.0
        for j, (m_j, th_j) in enumerate(parts):
            spread += (th_j - m_j) * math.prod(mus[:j] + mus[j + 1:])
        theta = biased.binomial_moment(d) * math.prod(mus) + dist.binomial_moment(d) * spread
        memo[key] = (mu, theta)
        return memo[key]

    return float(rec(pat.shape)[1])


@dataclass(frozen=True)
class ThetaEstimate:
    mean: float
    se: float
    reps: int
    exact: float
    heavy_tail_caveat: bool


def theta_kesten(dist: OffspringDistribution, pat, reps: int, rng) -> ThetaEstimate:
    """Monte Carlo estimate of theta from cuts of the Kesten tree at the pattern height."""
    if reps < 2:
        raise ValueError("need at least 2 replicates")
    pat = as_pattern(pat)
    gen = as_generator(rng)
    vals = np.array([toll_count(pat, sample_kesten(dist, pat.height, gen)) for _ in range(reps)],
                    dtype=np.float64)
    mean = math.fsum(vals) / reps
    var = math.fsum((vals - mean) ** 2) / (reps - 1)
    caveat = not math.isfinite(dist.raw_moment(2 * pat.max_degree + 1))
    try:
        exact = theta_exact(dist, pat)
    except (ValueError, ArithmeticError):
        exact = math.nan
    return ThetaEstimate(mean, math.sqrt(var / reps), reps, exact, caveat)
