"""Maximum-likelihood fitting of eFGM copulas as mixtures of extreme points.

Every admissible copula is a convex combination of the vertex copulas, and the
density is linear in the mixture weights. With xi[m, j] the density of vertex j
at row m, the weights are fitted by the mixture EM update

    lambda_j <- lambda_j * sum_m xi[m, j] / (xi lambda)[m] / m_obs

which keeps the weights on the simplex and never decreases the likelihood.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from efgm.errors import InvalidInputError, NumericError
from efgm.evaluation import _as_points, pmf_weights, symmetric_weight_dp
from efgm.geometry import ExtremePoint, admissibility_check, convex_combination_theta, enumerate_extreme_points
from efgm.representations import EQ_TOL, CopulaModel, ThetaVector, _check_dimension

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000
FREEZE_BELOW = 1e-15
ACTIVE_ABOVE = 1e-12
NORMALIZE_ABOVE_D = 30
XI_CHUNK_ROWS = 25_000


@dataclass(frozen=True)
class XiMatrix:
    """Vertex densities per row, stored as xi * exp(log_offsets[:, None])."""

    xi: np.ndarray
    log_offsets: np.ndarray
    vertices: Tuple[ExtremePoint, ...]

    @property
    def m_obs(self) -> int:
        return self.xi.shape[0]

    def densities(self) -> np.ndarray:
        return self.xi * np.exp(self.log_offsets)[:, None]


@dataclass(frozen=True)
class MixtureWeights:
    """Convex weights over `enumerate_extreme_points(d)`."""

    values: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if min(values) < 0.0 or abs(math.fsum(values) - 1.0) > EQ_TOL:
            raise InvalidInputError("Mixture weights must be non-negative and sum to 1", invariant="weights-sum")
        object.__setattr__(self, "values", values)

    def as_array(self) -> np.ndarray:
        return np.array(self.values)


@dataclass(frozen=True)
class FitResult:
    """Outcome of `em_fit`.

    Attributes:
        weights: Fitted mixture weights (not unique; compare `theta` instead)
        theta: Fitted dependence parameters
        loglik_trace: Log-likelihood after initialisation and after each update
        iterations: Number of EM updates performed
        converged: Whether the stopping rule fired before max_iter
        active_vertices: Indices of vertices with weight above 1e-12
    """

    weights: MixtureWeights
    theta: ThetaVector
    loglik_trace: Tuple[float, ...]
    iterations: int
    converged: bool
    active_vertices: Tuple[int, ...] = field(default_factory=tuple)

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theta": list(self.theta.theta),
            "loglik": self.loglik,
            "iterations": self.iterations,
            "converged": self.converged,
            "active_vertices": list(self.active_vertices),
        }


def _vertex_weights(vertices: Tuple[ExtremePoint, ...]) -> np.ndarray:
    return np.column_stack([pmf_weights(CopulaModel(pt.pmf)) for pt in vertices])


def compute_xi(data, d: int, threads: int = 1) -> XiMatrix:
    """
    Density of every extreme-point copula at every row of `data`.

    One symmetric-weight expansion per row is shared by all vertices.

    Args:
        data: Array of shape (m_obs, d) with entries in (0, 1)
        d: Dimension
        threads: Worker threads for the row chunks

    Returns:
        XiMatrix of shape (m_obs, n_d)

    Raises:
        InvalidInputError: If data is not strictly inside the unit cube
        NumericError: If some row has zero density under every vertex
    """
    d = _check_dimension(d)
    u = _as_points(data, d, closed=False)
    vertices = enumerate_extreme_points(d)
    weights = _vertex_weights(vertices)

    def chunk(block: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        sym = symmetric_weight_dp(2.0 * (1.0 - block), 2.0 * block)
        return sym.values @ weights, np.asarray(sym.log_scale, dtype=float)

    blocks = [u[i:i + XI_CHUNK_ROWS] for i in range(0, len(u), XI_CHUNK_ROWS)]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(blocks))) as pool:
            parts = list(pool.map(chunk, blocks))
    else:
        parts = [chunk(b) for b in blocks]
    xi = np.concatenate([p[0] for p in parts])
    offsets = np.concatenate([p[1] for p in parts])

    row_max = xi.max(axis=1)
    empty = np.flatnonzero(~(row_max > 0.0))
    if empty.size:
        raise NumericError(f"Row {int(empty[0])} has zero density under every extreme point", invariant="xi-row")
    if d > NORMALIZE_ABOVE_D:
        xi = xi / row_max[:, None]
        offsets = offsets + np.log(row_max)
    return XiMatrix(xi, offsets, vertices)


def _loglik(mix: np.ndarray, offset_total: float) -> float:
    return math.fsum(np.log(mix)) + offset_total


def em_fit(
    data,
    d: int,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    xi: Optional[XiMatrix] = None,
    threads: int = 1,
) -> FitResult:
    """
    Fit mixture weights over the extreme points by EM.

    Starts from uniform weights and stops when
    |loglik_t - loglik_{t-1}| < tol * (1 + |loglik_t|) or after max_iter updates.
    Weights falling below 1e-15 are frozen at zero.

    Args:
        data: Array of shape (m_obs, d) in (0, 1)^d
        d: Dimension
        tol: Relative log-likelihood tolerance, > 0
        max_iter: Maximum number of updates, >= 1
        xi: Precomputed vertex densities for `data`
        threads: Worker threads for the xi precompute

    Returns:
        FitResult; `converged` is False when max_iter was reached

    Raises:
        InvalidInputError: On malformed data or settings
        NumericError: If the log-likelihood becomes NaN
    """
    if not tol > 0:
        raise InvalidInputError(f"Tolerance must be positive, got {tol!r}", invariant="em-tol")
    if isinstance(max_iter, bool) or int(max_iter) != max_iter or max_iter < 1:
        raise InvalidInputError(f"max_iter must be a positive integer, got {max_iter!r}", invariant="em-max-iter")
    if xi is None:
        xi = compute_xi(data, d, threads=threads)
    matrix = xi.xi
    m_obs, n_d = matrix.shape
    if m_obs < n_d:
        logger.warning(f"Only {m_obs} observations for {n_d} extreme points; weights are poorly determined")

    offset_total = math.fsum(xi.log_offsets)
    weights = np.full(n_d, 1.0 / n_d)
    mix = matrix @ weights
    trace: List[float] = [_loglik(mix, offset_total)]
    converged = False
    iterations = 0
    for iterations in range(1, int(max_iter) + 1):
        weights = weights * (matrix.T @ (1.0 / mix)) / m_obs
        weights[weights < FREEZE_BELOW] = 0.0
        weights /= weights.sum()
        mix = matrix @ weights
        current = _loglik(mix, offset_total)
        if math.isnan(current):
            raise NumericError(f"Log-likelihood became NaN at iteration {iterations}", invariant="em-trace")
        trace.append(current)
        if abs(current - trace[-2]) < tol * (1.0 + abs(current)):
            converged = True
            break

    if converged:
        logger.info(f"EM converged after {iterations} iterations, loglik {trace[-1]:.6f}")
    else:
        logger.warning(f"EM stopped at max_iter={max_iter} without meeting tol={tol}")

    theta = convex_combination_theta(weights, xi.vertices)
    report = admissibility_check(theta)
    if not report.admissible:
        raise NumericError("Fitted parameters left the admissible set", invariant="em-admissible")
    return FitResult(
        weights=MixtureWeights(weights),
        theta=theta,
        loglik_trace=tuple(trace),
        iterations=iterations,
        converged=converged,
        active_vertices=tuple(int(j) for j in np.flatnonzero(weights > ACTIVE_ABOVE)),
    )


def pseudo_observations(raw) -> np.ndarray:
    """
    Column-wise rank / (m_obs + 1), average ranks for ties.

    Raises:
        InvalidInputError: If a column is constant, data has missing values,
            or fewer than two rows are given
    """
    frame = pd.DataFrame(np.asarray(raw, dtype=float))
    if frame.ndim != 2 or len(frame) < 2:
        raise InvalidInputError("Need a matrix with at least two rows", invariant="pseudo-obs-shape")
    if frame.isna().any().any():
        raise InvalidInputError("Data contains missing values", invariant="pseudo-obs-finite")
    constant = [int(c) for c in frame.columns if frame[c].nunique() == 1]
    if constant:
        raise InvalidInputError(f"Column {constant[0]} is constant", invariant="pseudo-obs-constant")
    return (frame.rank(method="average") / (len(frame) + 1)).to_numpy()
