"""Shared statistical machinery for the Monte Carlo checks.

Counts travel as dicts keyed by an arbitrary hashable cell (an edge-id tuple,
a bit mask, a tree index). Sparse cells are merged into one pooled bucket
before chi-square so the asymptotics hold; every result records how many
cells were merged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .errors import DomainError
from .rng import RngStream

# two-sided normal quantile for 99.9% intervals
Z_999 = 3.2905267314919255


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    pvalue: float
    cells: int
    merged: int

    def passes(self, significance: float = 1e-3) -> bool:
        return self.pvalue >= significance


def _align(counts: dict, probs: dict):
    keys = sorted(probs)
    missing = set(counts) - set(keys)
    if missing:
        raise DomainError(f"observed cell {sorted(missing)[0]!r} has no expected probability")
    obs = np.array([counts.get(k, 0) for k in keys], dtype=np.float64)
    p = np.array([probs[k] for k in keys], dtype=np.float64)
    if p.min() <= 0:
        raise DomainError("expected probabilities must be positive")
    return obs, p / p.sum()


def _merge_sparse(obs: np.ndarray, expected: np.ndarray, min_expected: float):
    """Pool every cell whose expectation is below the floor into one bucket."""
    sparse = expected < min_expected
    if sparse.sum() <= 1:
        return obs, expected, 0
    keep = ~sparse
    obs2 = np.append(obs[keep], obs[sparse].sum())
    exp2 = np.append(expected[keep], expected[sparse].sum())
    return obs2, exp2, int(sparse.sum())


def chi_square_gof(counts: dict, probs: dict, min_expected: float = 5.0) -> ChiSquareResult:
    """Goodness of fit of observed counts against an exact cell law."""
    obs, p = _align(counts, probs)
    n = obs.sum()
    if n <= 0:
        raise DomainError("no observations")
    obs, exp, merged = _merge_sparse(obs, n * p, min_expected)
    if len(obs) < 2:
        raise DomainError("need at least two cells after merging")
    stat = float(((obs - exp) ** 2 / exp).sum())
    dof = len(obs) - 1
    return ChiSquareResult(stat, dof, float(chi2.sf(stat, dof)), len(obs), merged)


def two_sample_chi_square(counts_a: dict, counts_b: dict,
                          min_expected: float = 5.0) -> ChiSquareResult:
    """Homogeneity test: were the two count tables drawn from one law?"""
    keys = sorted(set(counts_a) | set(counts_b))
    a = np.array([counts_a.get(k, 0) for k in keys], dtype=np.float64)
    b = np.array([counts_b.get(k, 0) for k in keys], dtype=np.float64)
    na, nb = a.sum(), b.sum()
    if na <= 0 or nb <= 0:
        raise DomainError("both samples need observations")
    pooled = (a + b) / (na + nb)
    # merge on the smaller sample's expectation so both margins stay dense
    floor_exp = min(na, nb) * pooled
    sparse = floor_exp < min_expected
    merged = 0
    if sparse.sum() > 1:
        keep = ~sparse
        a = np.append(a[keep], a[sparse].sum())
        b = np.append(b[keep], b[sparse].sum())
        merged = int(sparse.sum())
        pooled = (a + b) / (na + nb)
    if len(a) < 2:
        raise DomainError("need at least two cells after merging")
    stat = 0.0
    for vec, n in ((a, na), (b, nb)):
        exp = n * pooled
        stat += float(((vec - exp) ** 2 / exp).sum())
    dof = len(a) - 1
    return ChiSquareResult(stat, dof, float(chi2.sf(stat, dof)), len(a), merged)


def tv_distance(counts_a: dict, counts_b: dict) -> float:
    """Total variation between the two empirical laws."""
    keys = set(counts_a) | set(counts_b)
    na = sum(counts_a.values())
    nb = sum(counts_b.values())
    if na <= 0 or nb <= 0:
        raise DomainError("both samples need observations")
    return 0.5 * sum(abs(counts_a.get(k, 0) / na - counts_b.get(k, 0) / nb) for k in keys)


@dataclass(frozen=True)
class BootstrapTvResult:
    observed: float
    threshold: float
    quantile: float
    resamples: int

    @property
    def consistent_with_zero(self) -> bool:
        return self.observed <= self.threshold


def bootstrap_tv_null(counts_a: dict, counts_b: dict, rng: RngStream,
                      resamples: int = 1000, quantile: float = 0.999) -> BootstrapTvResult:
    """Observed TV against its bootstrap null under a common pooled law.

    Both samples are redrawn from the pooled empirical distribution; the
    returned threshold is the requested quantile of the resampled TVs, so
    `observed <= threshold` is the TV-is-zero verdict at that level.
    """
    keys = sorted(set(counts_a) | set(counts_b))
    a = np.array([counts_a.get(k, 0) for k in keys], dtype=np.int64)
    b = np.array([counts_b.get(k, 0) for k in keys], dtype=np.int64)
    na, nb = int(a.sum()), int(b.sum())
    if na <= 0 or nb <= 0:
        raise DomainError("both samples need observations")
    pooled = (a + b) / (na + nb)
    gen = rng.generator()
    ra = gen.multinomial(na, pooled, size=resamples) / na
    rb = gen.multinomial(nb, pooled, size=resamples) / nb
    tvs = 0.5 * np.abs(ra - rb).sum(axis=1)
    observed = 0.5 * float(np.abs(a / na - b / nb).sum())
    return BootstrapTvResult(observed, float(np.quantile(tvs, quantile)),
                             quantile, resamples)


def mean_ci(values, z: float = Z_999) -> tuple[float, float]:
    """(mean, z-sigma half width) of a sample."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise DomainError("no values")
    if x.size == 1:
        return float(x[0]), float("inf")
    return float(x.mean()), float(z * x.std(ddof=1) / np.sqrt(x.size))
