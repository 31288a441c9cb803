"""Critical offspring laws and the quantities derived from them.

Four families are supported:

``geom``       P(xi = k) = 2^-(k+1)          (uniform plane trees)
``poisson``    P(xi = k) = e^-1 / k!          (Cayley trees)
``table``      an explicit finite pmf
``heavytail``  P(xi = k) = c k^-(beta+1) for k >= 2, masses at 0 and 1 solved
               from total mass 1 and mean 1

Every law also has a size-biased twin (``biased=True``) with pmf k P(xi = k),
which is the root degree of the Kesten tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache, reduce

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gammainc, gammaln, zeta

from .errors import InfeasibleSizeError, InvalidDistributionError

KINDS = ("geom", "poisson", "table", "heavytail")
_SERIES_TERMS = 4000


@dataclass(frozen=True)
class OffspringDistribution:
    kind: str
    support: tuple[int, ...] = ()
    probs: tuple[float, ...] = ()
    beta: float = 0.0
    mass0: float = 0.0
    mass1: float = 0.0
    norm: float = 0.0
    biased: bool = False
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidDistributionError(f"unknown offspring family {self.kind!r}")

    # -- pmf and tails -----------------------------------------------------

    def pmf_array(self, kmax: int) -> np.ndarray:
        """P(xi = k) for k = 0..kmax."""
        k = np.arange(kmax + 1, dtype=np.float64)
        if self.kind == "geom":
            p = np.exp2(-(k + 1))
        elif self.kind == "poisson":
            p = np.exp(-1.0 - gammaln(k + 1))
        elif self.kind == "table":
            p = np.zeros(kmax + 1)
            for s, q in zip(self.support, self.probs):
                if s <= kmax:
                    p[s] = q
        else:
            p = np.zeros(kmax + 1)
            p[0] = self.mass0
            if kmax >= 1:
                p[1] = self.mass1
            if kmax >= 2:
                p[2:] = self.norm * k[2:] ** -(self.beta + 1)
        if self.biased:
            p = p * k
        return p

    def pmf(self, k: int) -> float:
        if k < 0:
            return 0.0
        return float(self.pmf_array(k)[k])

    def tail_mass(self, kmin: int) -> float:
        """P(xi >= kmin)."""
        if kmin <= 0:
            return 1.0
        b = self.biased
        if self.kind == "geom":
            return (kmin + 1) * 2.0**-kmin if b else 2.0**-kmin
        if self.kind == "poisson":
            if b:
                return 1.0 if kmin == 1 else float(gammainc(kmin - 1, 1.0))
            return float(gammainc(kmin, 1.0))
        if self.kind == "table":
            return math.fsum(q * (s if b else 1) for s, q in zip(self.support, self.probs) if s >= kmin)
        exponent = self.beta if b else self.beta + 1
        if kmin >= 2:
            return float(self.norm * zeta(exponent, kmin))
        return self.mass1 + float(self.norm * zeta(exponent, 2))

    @cached_property
    def max_support(self) -> float:
        return float(max(self.support)) if self.kind == "table" else math.inf

    @cached_property
    def span(self) -> int:
        if self.kind == "table":
            pos = [s for s, q in zip(self.support, self.probs) if s >= 1 and q > 0]
            return max(reduce(math.gcd, pos, 0), 1)
        return 1

    # -- moments -----------------------------------------------------------

    def raw_moment(self, m: int) -> float:
        """E xi^m as an extended real (``math.inf`` when divergent)."""
        if m == 0:
            return 1.0
        if self.biased:
            return replace(self, biased=False).raw_moment(m + 1)
        if self.kind == "table":
            return float(sum(q * s**m for s, q in zip(self.support, self.probs)))
        if self.kind == "heavytail":
            if m >= self.beta:
                return math.inf
            return self.mass1 + self.norm * (float(zeta(self.beta + 1 - m)) - 1.0)
        k = np.arange(_SERIES_TERMS, dtype=np.float64)
        return float(np.sum(self.pmf_array(_SERIES_TERMS - 1) * k**m))

    @property
    def mean(self) -> float:
        return self.raw_moment(1)

    @property
    def variance(self) -> float:
        return self.raw_moment(2) - self.mean**2

    def binomial_moment(self, d: int) -> float:
        """E C(xi, d); divergent values come back as ``math.inf``."""
        if d == 0:
            return 1.0
        if self.kind in ("table", "geom", "poisson"):
            kmax = int(self.max_support) if self.kind == "table" else _SERIES_TERMS - 1
            k = np.arange(kmax + 1)
            return float(np.sum(self.pmf_array(kmax) * _binom_row(k, d)))
        # falling-factorial polynomial expanded into raw moments
        coeffs = np.poly(np.arange(d))[::-1] / math.factorial(d)
        total = 0.0
        for j, a in enumerate(coeffs):
            if a == 0:
                continue
            mj = self.raw_moment(j)
            if math.isinf(mj):
                return math.inf
            total += a * mj
        return total

    def moment(self, m: int) -> float:
        if m < 1:
            raise ValueError("moment order must be a positive integer")
        return self.raw_moment(m)

    # -- sampling ----------------------------------------------------------

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        b = self.biased
        if self.kind == "geom":
            if b:
                return 1 + rng.negative_binomial(2, 0.5, size).astype(np.int64)
            return rng.geometric(0.5, size).astype(np.int64) - 1
        if self.kind == "poisson":
            return rng.poisson(1.0, size).astype(np.int64) + (1 if b else 0)
        if self.kind == "table":
            support, cdf = _table_cdf(self)
            idx = np.searchsorted(cdf, rng.random(size), side="right")
            return support[np.minimum(idx, support.size - 1)]
        # heavytail: 0 / 1 / power-law part on k >= 2
        w0 = 0.0 if b else self.mass0
        w1 = self.mass1
        u = rng.random(size)
        out = np.where(u < w0, 0, 1).astype(np.int64)
        big = u >= w0 + w1
        nbig = int(big.sum())
        if nbig:
            exponent = self.beta if b else self.beta + 1
            out[big] = sample_power_law(rng, exponent, 2, nbig)
        return out

    def describe(self) -> str:
        return self.label or format_distribution(self)


def _binom_row(k: np.ndarray, d: int) -> np.ndarray:
    out = np.ones(k.shape, dtype=np.float64)
    for i in range(d):
        out *= (k - i) / (i + 1)
    return np.where(k >= d, out, 0.0)


@lru_cache(maxsize=64)
def _table_cdf(dist: OffspringDistribution):
    support = np.array(dist.support, dtype=np.int64)
    p = np.array(dist.probs, dtype=np.float64)
    if dist.biased:
        p = p * support
    keep = p > 0
    support, p = support[keep], p[keep]
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    return support, cdf


@lru_cache(maxsize=16)
def _power_law_table(exponent: float, kmin: int, kcut: int):
    ks = np.arange(kmin, kcut, dtype=np.int64)
    cdf = np.cumsum(ks.astype(np.float64) ** -exponent) / float(zeta(exponent, kmin))
    return ks, cdf


def sample_power_law(rng: np.random.Generator, exponent: float, kmin: int, size: int,
                     kcut: int = 1 << 16) -> np.ndarray:
    """Exact draws from P(K = k) proportional to k^-exponent on k >= kmin.

    Inverse-CDF lookup below ``kcut``; above it, rejection from a discretized
    Pareto proposal.
    """
    if exponent <= 1:
        raise ValueError("power-law exponent must exceed 1")
    ks, cdf = _power_law_table(float(exponent), kmin, max(kcut, kmin + 1))
    idx = np.searchsorted(cdf, rng.random(size), side="right")
    out = np.empty(size, dtype=np.int64)
    inside = idx < ks.size
    out[inside] = ks[idx[inside]]
    need = int((~inside).sum())
    if need:
        out[~inside] = _power_law_rejection(rng, exponent, ks[-1] + 1, need)
    return out


def _power_law_rejection(rng, exponent, k0, size):
    s = exponent - 1.0
    bound = ((k0 + 1) / k0) ** exponent / s
    got = []
    count = 0
    while count < size:
        m = max(2 * (size - count), 8)
        y = k0 * rng.random(m) ** (-1.0 / s)
        k = np.floor(y)
        ok = np.isfinite(k) & (k < 2**62)
        k = k[ok]
        ratio = k ** -exponent / (k ** -s - (k + 1) ** -s)
        acc = rng.random(k.size) * bound < ratio
        got.append(k[acc].astype(np.int64))
        count += int(acc.sum())
    return np.concatenate(got)[:size]


# -- constructors --------------------------------------------------------


def geometric_half() -> OffspringDistribution:
    return OffspringDistribution("geom", label="geom")


def poisson_unit() -> OffspringDistribution:
    return OffspringDistribution("poisson", label="poisson")


def table(pmf: dict[int, float]) -> OffspringDistribution:
    items = sorted((int(k), float(v)) for k, v in pmf.items())
    if any(k < 0 for k, _ in items):
        raise InvalidDistributionError("offspring values must be nonnegative")
    if any(v < 0 for _, v in items):
        raise InvalidDistributionError("probabilities must be nonnegative")
    return OffspringDistribution("table", support=tuple(k for k, _ in items),
                                 probs=tuple(v for _, v in items))


def heavy_tail(beta: float, norm: float | None = None) -> OffspringDistribution:
    """P(xi = k) = norm * k^-(beta+1) for k >= 2, masses at 0 and 1 solved.

    ``norm`` defaults to its largest admissible value, which puts zero mass at
    1 and makes the tail as heavy as the family allows.
    """
    if beta <= 1:
        raise InvalidDistributionError("heavy-tail exponent beta must exceed 1 for a finite mean")
    zb = float(zeta(beta)) - 1.0
    zb1 = float(zeta(beta + 1)) - 1.0
    if norm is None:
        norm = 1.0 / zb
    mass1 = 1.0 - norm * zb
    mass0 = norm * (zb - zb1)
    if norm <= 0 or mass1 < -1e-15:
        raise InvalidDistributionError(f"normalizer {norm} gives a negative mass at 1")
    return OffspringDistribution("heavytail", beta=float(beta), mass0=mass0,
                                 mass1=max(mass1, 0.0), norm=float(norm))


def size_biased(dist: OffspringDistribution, strict: bool = True) -> OffspringDistribution:
    """Law of the size-biased offspring, P(hat xi = k) = k P(xi = k).

    With ``strict=False`` a non-critical input is accepted and the returned
    weights k P(xi = k) no longer sum to one.
    """
    if dist.biased:
        raise InvalidDistributionError("distribution is already size-biased")
    report = validate(dist)
    if strict and not report.critical:
        raise InvalidDistributionError(f"size-biasing needs mean 1, got {report.mean}")
    if dist.kind == "table":
        pairs = {s: s * q for s, q in zip(dist.support, dist.probs) if s > 0}
        return table(pairs)
    return replace(dist, biased=True, label="")


# -- validation ----------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    total_mass: float
    mean: float
    p0: float
    span: int
    has_extinction: bool
    critical: bool
    normalized: bool
    variance: float

    @property
    def valid(self) -> bool:
        return self.has_extinction and self.critical and self.normalized

    @property
    def residue_restricted(self) -> bool:
        """True when only sizes n = 1 (mod span) are reachable."""
        return self.span > 1

    def feasible_size(self, n: int) -> bool:
        return n >= 1 and (n - 1) % max(self.span, 1) == 0


MASS_TOL = 1e-12
MEAN_TOL = 1e-9


@lru_cache(maxsize=256)
def validate(dist: OffspringDistribution) -> ValidationReport:
    """Check p(0) > 0, total mass 1 and mean 1; compute the span."""
    if dist.kind == "table":
        if not dist.probs or sum(dist.probs) <= 0:
            raise InvalidDistributionError("pmf has no mass")
        weights = [q * (s if dist.biased else 1) for s, q in zip(dist.support, dist.probs)]
        total = math.fsum(weights)
    elif dist.kind == "heavytail":
        total = dist.tail_mass(1) + (0.0 if dist.biased else dist.mass0)
    else:
        total = 1.0
    mean = dist.raw_moment(1)
    p0 = dist.pmf(0)
    return ValidationReport(total_mass=total, mean=mean, p0=p0, span=dist.span,
                            has_extinction=p0 > 0,
                            critical=abs(mean - 1.0) <= MEAN_TOL,
                            normalized=abs(total - 1.0) <= MASS_TOL,
                            variance=dist.raw_moment(2) - mean**2)


def require_valid(dist: OffspringDistribution) -> ValidationReport:
    report = validate(dist)
    if not report.valid:
        problems = []
        if not report.has_extinction:
            problems.append("p(0) must be positive")
        if not report.normalized:
            problems.append(f"total mass {report.total_mass} != 1")
        if not report.critical:
            problems.append(f"mean {report.mean} != 1")
        raise InvalidDistributionError("; ".join(problems))
    return report


def require_feasible(dist: OffspringDistribution, n: int) -> None:
    span = require_valid(dist).span
    if n < 1 or (n - 1) % span:
        raise InfeasibleSizeError(f"size {n} is unreachable: offspring span {span} needs n = 1 (mod {span})")
    # laws with gaps in their support (tables, heavy tails with p(1) = 0) can
    # miss small sizes; large sizes are always reachable once the span fits
    if (dist.kind == "table" or n <= 64) and _cached_size_probability(dist, n) == 0.0:
        raise InfeasibleSizeError(f"no tree of size {n} has positive probability")


# -- total-size law ------------------------------------------------------


def _truncated_power(p: np.ndarray, m: int) -> np.ndarray:
    """pmf of a sum of m iid copies, kept on 0..len(p)-1."""
    size = p.size
    conv = np.convolve if size <= 1024 else fftconvolve
    result = np.zeros(size)
    result[0] = 1.0
    base = p.copy()
    while m:
        if m & 1:
            result = np.clip(conv(result, base)[:size], 0.0, None)
        m >>= 1
        if m:
            base = np.clip(conv(base, base)[:size], 0.0, None)
    return result


def sum_probability(dist: OffspringDistribution, m: int, s: int) -> float:
    """P(S_m = s) for the sum of m iid offspring values."""
    if s < 0:
        return 0.0
    if m == 0:
        return 1.0 if s == 0 else 0.0
    return float(_truncated_power(dist.pmf_array(s), m)[s])


def size_probability(dist: OffspringDistribution, k: int) -> float:
    """pi_k = P(|T| = k), through P(S_k = k - 1) / k."""
    if k < 1:
        return 0.0
    if k == 1:
        return dist.pmf(0)
    return sum_probability(dist, k, k - 1) / k


@lru_cache(maxsize=1024)
def _cached_size_probability(dist: OffspringDistribution, k: int) -> float:
    return size_probability(dist, k)


def size_probabilities(dist: OffspringDistribution, kmax: int) -> np.ndarray:
    """Array with pi_k at index k (index 0 unused and zero)."""
    out = np.zeros(kmax + 1)
    for k in range(1, kmax + 1):
        out[k] = size_probability(dist, k)
    return out


# -- spec strings --------------------------------------------------------


def parse_distribution(spec: str) -> OffspringDistribution:
    """Parse ``geom``, ``poisson``, ``table:0=0.5,2=0.5`` or ``heavytail:beta=3``.

    ``heavytail`` also accepts ``c=<normalizer>``.
    """
    text = spec.strip()
    name, _, rest = text.partition(":")
    try:
        if name == "geom" and not rest:
            dist = geometric_half()
        elif name == "poisson" and not rest:
            dist = poisson_unit()
        elif name == "table":
            pmf = {}
            for item in rest.split(","):
                k, _, v = item.partition("=")
                pmf[int(k)] = pmf.get(int(k), 0.0) + float(v)
            dist = table(pmf)
        elif name == "heavytail":
            params = dict(item.split("=", 1) for item in rest.split(",") if item)
            unknown = set(params) - {"beta", "c"}
            if unknown or "beta" not in params:
                raise ValueError(f"heavytail needs beta=<value>, got {rest!r}")
            c = float(params["c"]) if "c" in params else None
            dist = heavy_tail(float(params["beta"]), c)
        else:
            raise ValueError(f"unrecognized distribution spec {spec!r}")
    except InvalidDistributionError:
        raise
    except ValueError as exc:
        raise InvalidDistributionError(str(exc)) from exc
    return replace(dist, label=text)


def format_distribution(dist: OffspringDistribution) -> str:
    prefix = "biased-" if dist.biased else ""
    if dist.kind in ("geom", "poisson"):
        return prefix + dist.kind
    if dist.kind == "table":
        return prefix + "table:" + ",".join(f"{s}={q:g}" for s, q in zip(dist.support, dist.probs))
    return prefix + f"heavytail:beta={dist.beta:g},c={dist.norm:.12g}"
