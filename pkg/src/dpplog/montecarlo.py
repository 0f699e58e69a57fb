"""Estimates, mergeable running moments and per-worker random streams."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo (n > 0) or quadrature (n == 0, stderr == 0) result."""

    value: float
    stderr: float = 0.0
    n: int = 0

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")

    def z(self, other: "Estimate") -> float:
        se = np.hypot(self.stderr, other.stderr)
        diff = abs(self.value - other.value)
        return diff / se if se > 0 else (0.0 if diff == 0 else np.inf)


@dataclass
class RunningStats:
    """Count, mean and sum of squared deviations; merges associatively."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def update(self, values):
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            return self
        other = RunningStats(values.size, float(values.mean()),
                             float(np.sum((values - values.mean()) ** 2)))
        return self.merge(other)

    def merge(self, other: "RunningStats"):
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean, other.m2
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean += delta * other.n / n
        self.m2 += other.m2 + delta * delta * self.n * other.n / n
        self.n = n
        return self

    @property
    def variance(self):
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0

    def estimate(self) -> Estimate:
        se = np.sqrt(self.variance / self.n) if self.n > 1 else 0.0
        return Estimate(self.mean, float(se), self.n)


def mean_estimate(values) -> Estimate:
    return RunningStats().update(values).estimate()


def variance_estimate(values) -> Estimate:
    """Sample variance with the large-sample standard error sqrt((m4 - s^4) / n)."""
    v = np.asarray(values, dtype=float)
    n = v.size
    c = v - v.mean()
    s2 = c @ c / (n - 1)
    m4 = np.mean(c**4)
    se = np.sqrt(max(m4 - s2 * s2, 0.0) / n)
    return Estimate(float(s2), float(se), n)


def mean_square_estimate(values) -> Estimate:
    return mean_estimate(np.asarray(values, dtype=float) ** 2)


def ratio_estimate(num, den) -> Estimate:
    """mean(num) / mean(den) with a delta-method standard error."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = num.size
    r = num.mean() / den.mean()
    resid = (num - r * den) / den.mean()
    se = resid.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
    return Estimate(float(r), float(se), n)


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def spawn_generators(seed, n):
    """``n`` independent generators derived from ``seed``."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def chunk_sizes(total, chunk):
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes


def run_chunks(func, total, seed, *, chunk=5000, workers=1, args=()):
    """Call ``func(size, rng, *args)`` on fixed-size chunks, one stream per chunk.

    The chunking depends only on ``total`` and ``chunk``, so results do not
    depend on the number of workers.  Returns the list of chunk results in
    order.
    """
    sizes = chunk_sizes(total, chunk)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    if workers <= 1 or len(sizes) == 1:
        return [func(n, np.random.default_rng(s), *args) for n, s in zip(sizes, seeds)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(_call_chunk, func, n, s, args) for n, s in zip(sizes, seeds)]
        return [f.result() for f in futs]


def _call_chunk(func, n, seed_seq, args):
    return func(n, np.random.default_rng(seed_seq), *args)
