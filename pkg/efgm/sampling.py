"""Exact sampling of eFGM copulas through their Bernoulli representation.

Each row draws N_d from (p_0, ..., p_d), scatters N_d ones uniformly over the
d coordinates, then sets U_j = sqrt(V0_j) * V1_j^(1 - I_j). Coordinates with
I_j = 1 follow the max-type law u^2; those with I_j = 0 follow 2u - u^2.

Generator: numpy PCG64. Rows are cut into shards of SHARD_ROWS; shard s uses
the s-th child of SeedSequence(seed). Within a shard the stream order is fixed:
the N_d draws, the per-row shuffles, then V of shape (rows, d, 2). Changing
any of this changes every sample.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import special

from efgm.errors import InvalidInputError
from efgm.evaluation import symmetric_weight_dp
from efgm.representations import CopulaModel, MixingSpec, ModelInput, _check_dimension, canonicalize

logger = logging.getLogger(__name__)

SHARD_ROWS = 50_000
ALIAS_THRESHOLD = 10_000
MAX_SEED = 2 ** 64


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """n x d copula sample together with what produced it."""

    rows: np.ndarray
    seed: int
    model: CopulaModel

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=[f"u{j + 1}" for j in range(self.d)])


def _check_request(n: int, seed: int) -> Tuple[int, int]:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidInputError(f"Sample size must be a positive integer, got {n!r}", invariant="sample-size")
    if isinstance(seed, bool) or int(seed) != seed or not 0 <= seed < MAX_SEED:
        raise InvalidInputError(f"Seed must be an unsigned 64-bit integer, got {seed!r}", invariant="seed")
    return int(n), int(seed)


def _alias_tables(p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vose's alias tables for a pmf."""
    size = len(p)
    scaled = p * size
    prob = np.ones(size)
    alias = np.arange(size)
    small = [i for i in range(size) if scaled[i] < 1.0]
    large = [i for i in range(size) if scaled[i] >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = scaled[l] + scaled[s] - 1.0
        (small if scaled[l] < 1.0 else large).append(l)
    return prob, alias


def _count_sampler(p: np.ndarray, total_rows: int) -> Callable[[np.random.Generator, int], np.ndarray]:
    d = len(p) - 1
    if total_rows > ALIAS_THRESHOLD:
        prob, alias = _alias_tables(p)

        def draw(rng: np.random.Generator, rows: int) -> np.ndarray:
            column = rng.integers(0, d + 1, size=rows)
            coin = rng.random(rows)
            return np.where(coin < prob[column], column, alias[column])

        return draw

    cdf = np.cumsum(p)

    def draw(rng: np.random.Generator, rows: int) -> np.ndarray:
        return np.minimum(np.searchsorted(cdf, rng.random(rows), side="right"), d)

    return draw


def _uniforms(rng: np.random.Generator, counts: np.ndarray, d: int) -> np.ndarray:
    indicators = (np.arange(d)[None, :] < counts[:, None]).astype(np.int8)
    indicators = rng.permuted(indicators, axis=1)
    v = rng.random((len(counts), d, 2))
    return np.sqrt(v[..., 0]) * v[..., 1] ** (1 - indicators)


def _shards(n: int) -> List[int]:
    full, rest = divmod(n, SHARD_ROWS)
    return [SHARD_ROWS] * full + ([rest] if rest else [])


def _run_shards(
    n: int, seed: int, threads: int, draw_counts: Callable[[np.random.Generator, int], np.ndarray], d: int
) -> np.ndarray:
    sizes = _shards(n)
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def work(job: Tuple[int, np.random.SeedSequence]) -> np.ndarray:
        rows, child = job
        rng = np.random.Generator(np.random.PCG64(child))
        return _uniforms(rng, draw_counts(rng, rows), d)

    workers = max(1, min(int(threads), len(sizes)))
    logger.debug(f"Sampling {n} rows in {len(sizes)} shard(s) on {workers} thread(s)")
    if workers == 1:
        parts = [work(job) for job in zip(sizes, children)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, zip(sizes, children)))
    rows = np.concatenate(parts)
    rows.setflags(write=False)
    return rows


def sample(model: ModelInput, n: int, seed: int, d: Optional[int] = None, threads: int = 1) -> SampleBatch:
    """
    Draw n rows from an eFGM copula.

    Args:
        model: Any parameterization accepted by `canonicalize`
        n: Number of rows, at least 1
        seed: Unsigned 64-bit seed
        d: Dimension, needed only for mixing specifications
        threads: Worker threads; output does not depend on it

    Returns:
        SampleBatch whose rows are reproduced exactly by the same (model, n, seed)

    Raises:
        InvalidInputError: If the model, n or seed is invalid
    """
    model = canonicalize(model, d)
    n, seed = _check_request(n, seed)
    rows = _run_shards(n, seed, threads, _count_sampler(model.pmf.as_array(), n), model.d)
    return SampleBatch(rows, seed, model)


def sample_mixture(m: MixingSpec, n: int, d: int, seed: int, threads: int = 1) -> SampleBatch:
    """
    Draw rows through the mixing variable: Lambda, then N_d ~ Binomial(d, Lambda).

    Distributionally identical to `sample` on CopulaModel.from_mixing(m, d).

    Raises:
        InvalidInputError: If the mixing specification has no sampler
    """
    d = _check_dimension(d)
    n, seed = _check_request(n, seed)

    def draw_counts(rng: np.random.Generator, rows: int) -> np.ndarray:
        lam = np.clip(m.sample(rng, rows), 0.0, 1.0)
        return rng.binomial(d, lam)

    rows = _run_shards(n, seed, threads, draw_counts, d)
    return SampleBatch(rows, seed, CopulaModel.from_mixing(m, d))


def _theta_statistic(batch: SampleBatch, k: int) -> np.ndarray:
    d = batch.d
    if not 2 <= k <= d:
        raise InvalidInputError(f"k must lie in 2..{d}, got {k}", invariant="theta-index")
    x = 1.0 - 2.0 * np.asarray(batch.rows)
    elementary = symmetric_weight_dp(np.ones_like(x), x).unscaled()[:, k]
    return 3.0 ** k * elementary / special.comb(d, k)


def empirical_theta(batch: SampleBatch, k: int) -> float:
    """Moment estimate 3^k * mean over rows and k-subsets of prod (1 - 2 U_j)."""
    return float(np.mean(_theta_statistic(batch, k)))


def empirical_theta_se(batch: SampleBatch, k: int) -> float:
    """Standard error of `empirical_theta`; rows are i.i.d."""
    stat = _theta_statistic(batch, k)
    if stat.size < 2:
        return math.inf
    return float(np.std(stat, ddof=1) / math.sqrt(stat.size))
