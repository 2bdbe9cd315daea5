"""Admissibility and extreme-point geometry of eFGM parameters."""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, optimize

from efgm.errors import CapabilityError, InvalidInputError, NumericError
from efgm.evaluation import symmetric_weight_dp
from efgm.representations import (
    CLAMP_TOL,
    ORACLE_MAX_D,
    ROUND_TRIP_TOL,
    NdPmf,
    ThetaVector,
    _check_dimension,
    krawtchouk_table,
    margin_matrix,
    theta_from_nd_pmf,
)

logger = logging.getLogger(__name__)

DECOMPOSITION_TOL = 1e-10
SUPPORT_TOL = 1e-12
NEGATIVE_WEIGHT_TOL = 1e-9


@lru_cache(maxsize=None)
def _margin_tolerance(d: int) -> np.ndarray:
    # rounding in theta propagates through |K_k(m)|, so the clamp scales with it
    table = krawtchouk_table(d)
    return np.array([CLAMP_TOL * (1 + sum(abs(table[k][m]) for k in range(2, d + 1))) for m in range(d + 1)])


@dataclass(frozen=True)
class ConstraintReport:
    """Outcome of the reduced admissibility check.

    margins[m] = 1 + sum_k theta_k K_k(m) is the sign constraint shared by every
    epsilon in {-1, 1}^d with m entries equal to -1.
    """

    admissible: bool
    margins: Tuple[float, ...]
    worst_m: int
    boundary: bool = False
    violations: Tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "admissible": self.admissible,
            "boundary": self.boundary,
            "worst_m": self.worst_m,
            "margins": list(self.margins),
            "violations": list(self.violations),
        }


def admissibility_check(t: ThetaVector) -> ConstraintReport:
    """
    Check theta against the 2^d sign constraints, collapsed to d + 1 margins.

    Args:
        t: Dependence parameters

    Returns:
        ConstraintReport; `boundary` is set when the smallest margin sits in
        the clamp band just below zero
    """
    d = t.d
    margins = 1.0 + margin_matrix(d) @ t.as_array()
    tolerance = _margin_tolerance(d)
    worst = int(np.argmin(margins))
    failing = np.flatnonzero(margins < -tolerance)
    violations = tuple(
        f"Sign constraint with m={m} negative coordinates is {margins[m]:.6g} < 0" for m in failing
    )
    boundary = not failing.size and bool(np.any(margins < 0.0))
    if boundary:
        logger.warning(f"Parameters lie on the boundary of T_{d} (margin {margins[worst]:.3e} at m={worst})")
    return ConstraintReport(
        admissible=not failing.size,
        margins=tuple(float(g) for g in margins),
        worst_m=worst,
        boundary=boundary,
        violations=violations,
    )


@lru_cache(maxsize=None)
def _sign_pattern_matrix(d: int) -> Tuple[np.ndarray, np.ndarray]:
    codes = np.arange(2 ** d, dtype=np.int64)
    eps = 1.0 - 2.0 * ((codes[:, None] >> np.arange(d)) & 1)
    elementary = symmetric_weight_dp(np.ones_like(eps), eps).values[:, 2:]
    negatives = ((codes[:, None] >> np.arange(d)) & 1).sum(axis=1)
    elementary.setflags(write=False)
    return elementary, negatives


def full_constraint_check(t: ThetaVector) -> bool:
    """Evaluate all 2^d constraints 1 + sum_k theta_k e_k(epsilon) >= 0 literally.

    Raises:
        CapabilityError: If d exceeds the enumeration limit
    """
    d = t.d
    if d > ORACLE_MAX_D:
        raise CapabilityError(f"Sign enumeration supports d <= {ORACLE_MAX_D}, got {d}", invariant="oracle-size")
    elementary, negatives = _sign_pattern_matrix(d)
    values = 1.0 + elementary @ t.as_array()
    return bool(np.all(values >= -_margin_tolerance(d)[negatives]))


@dataclass(frozen=True)
class ExtremePoint:
    """A vertex of N_d: two-point pmf on (j1, j2), or the point mass at d/2 (even d)."""

    kind: str
    j1: int
    j2: int
    pmf: NdPmf
    theta: ThetaVector


def _pair_bounds(d: int) -> Tuple[int, int]:
    if d % 2:
        return (d - 1) // 2, (d + 1) // 2
    return d // 2 - 1, d // 2 + 1


@lru_cache(maxsize=None)
def enumerate_extreme_points(d: int) -> Tuple[ExtremePoint, ...]:
    """
    List the extreme points of N_d with their copula parameters.

    Pairs come first in lexicographic (j1, j2) order, followed by the centre
    point when d is even. There are (d + 1)^2/4 points for odd d and
    d^2/4 + 1 for even d.

    Args:
        d: Dimension, at least 2

    Returns:
        Tuple of ExtremePoint
    """
    d = _check_dimension(d)
    j1_max, j2_min = _pair_bounds(d)
    half = Fraction(d, 2)
    points: List[ExtremePoint] = []
    for j1 in range(j1_max + 1):
        for j2 in range(j2_min, d + 1):
            p = [0.0] * (d + 1)
            p[j1] = float((j2 - half) / (j2 - j1))
            p[j2] = float((half - j1) / (j2 - j1))
            pmf = NdPmf(d, p)
            points.append(ExtremePoint("pair", j1, j2, pmf, theta_from_nd_pmf(pmf)))
    if d % 2 == 0:
        p = [0.0] * (d + 1)
        p[d // 2] = 1.0
        pmf = NdPmf(d, p)
        points.append(ExtremePoint("center", d // 2, d // 2, pmf, theta_from_nd_pmf(pmf)))
    logger.debug(f"Enumerated {len(points)} extreme points for d={d}")
    return tuple(points)


def extreme_point_count(d: int) -> int:
    d = _check_dimension(d)
    return (d + 1) ** 2 // 4 if d % 2 else d * d // 4 + 1


@dataclass(frozen=True)
class ConvexDecomposition:
    """Weights over `enumerate_extreme_points(d)` reproducing a pmf."""

    weights: Tuple[float, ...]
    residual: float
    points: Tuple[ExtremePoint, ...]

    def active(self) -> List[Tuple[ExtremePoint, float]]:
        return [(pt, w) for pt, w in zip(self.points, self.weights) if w > SUPPORT_TOL]


def _vertex_matrix(points: Sequence[ExtremePoint]) -> np.ndarray:
    return np.column_stack([pt.pmf.as_array() for pt in points])


def _residual(A: np.ndarray, weights: np.ndarray, target: np.ndarray) -> float:
    return float(np.max(np.abs(A @ weights - target)))


def _least_distance(G: np.ndarray, h: np.ndarray) -> np.ndarray:
    """
    Shortest x with G x >= h, through one non-negative least-squares solve.

    Raises:
        NumericError: If the constraints are infeasible
    """
    k = G.shape[1]
    E = np.vstack([G.T, h])
    f = np.zeros(k + 1)
    f[k] = 1.0
    u, _ = optimize.nnls(E, f, maxiter=50 * E.shape[1])
    r = E @ u - f
    if abs(r[k]) <= SUPPORT_TOL:
        raise NumericError("Least-distance constraints are infeasible", invariant="decomposition-feasible")
    return -r[:k] / r[k]


def decompose(p: NdPmf) -> ConvexDecomposition:
    """
    Write `p` as a convex combination of the extreme points of N_d.

    The decomposition is not unique; this returns the minimum Euclidean-norm
    weight vector. With w0 the minimum-norm solution of A w = p and N an
    orthonormal null-space basis of A, every solution is w0 + N z and
    |w|^2 = |w0|^2 + |z|^2, so the problem reduces to the shortest z with
    N z >= -w0.

    Args:
        p: Valid N_d pmf

    Returns:
        ConvexDecomposition with max-norm reconstruction residual <= 1e-10

    Raises:
        NumericError: If no decomposition within tolerance is found
    """
    points = enumerate_extreme_points(p.d)
    A = _vertex_matrix(points)
    target = p.as_array()

    w0 = np.linalg.lstsq(A, target, rcond=None)[0]
    null_basis = linalg.null_space(A)
    if null_basis.shape[1] == 0:
        weights = w0
    else:
        weights = w0 + null_basis @ _least_distance(null_basis, -w0)

    if weights.min() < -NEGATIVE_WEIGHT_TOL:
        raise NumericError(
            f"Convex decomposition produced weight {weights.min():.3e}", invariant="decomposition-sign"
        )
    weights = np.where(weights > SUPPORT_TOL, weights, 0.0)
    residual = _residual(A, weights, target)
    if residual > DECOMPOSITION_TOL:
        raise NumericError(
            f"Convex decomposition failed: residual {residual:.3e} exceeds {DECOMPOSITION_TOL}",
            invariant="decomposition-residual",
        )
    logger.debug(f"Decomposed d={p.d} pmf over {int(np.count_nonzero(weights))} extreme points")
    return ConvexDecomposition(tuple(float(w) for w in weights), residual, points)


def convex_combination_theta(
    weights: Sequence[float], points: Sequence[Union[ExtremePoint, ThetaVector]]
) -> ThetaVector:
    """
    theta_k = sum_j lambda_j theta_{j,k}.

    Raises:
        InvalidInputError: If weights are negative, do not sum to one, or do
            not match the points
    """
    w = np.asarray(weights, dtype=float)
    thetas = [pt.theta if isinstance(pt, ExtremePoint) else pt for pt in points]
    if w.shape != (len(thetas),) or not thetas:
        raise InvalidInputError(f"Got {w.size} weights for {len(thetas)} points", invariant="weights-length")
    if w.min() < -SUPPORT_TOL:
        raise InvalidInputError(f"Weights must be non-negative, got {w.min()!r}", invariant="weights-nonnegative")
    if abs(w.sum() - 1.0) > ROUND_TRIP_TOL:
        raise InvalidInputError(f"Weights sum to {w.sum()!r}, not 1", invariant="weights-sum")
    d = thetas[0].d
    if any(t.d != d for t in thetas):
        raise InvalidInputError("All points must share the same dimension", invariant="dimension")
    stacked = np.array([t.theta for t in thetas])
    return ThetaVector(d, np.clip(w, 0.0, None) @ stacked)
