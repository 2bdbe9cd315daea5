"""Exact cdf, density and log-likelihood of eFGM copulas.

The stochastic representation writes both the cdf and the density as
sum_i f(i) prod_m h(u_m, i_m) over i in {0, 1}^d. By exchangeability f(i)
only depends on i_1 + ... + i_d, so the sum collapses to d + 1 terms weighted
by degree-graded symmetric products, computed here in O(d^2) per point.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import special

from efgm.errors import CapabilityError, EvaluationError, InvalidInputError
from efgm.representations import ORACLE_MAX_D, CopulaModel, ModelInput, canonicalize

logger = logging.getLogger(__name__)

MAX_DP_D = 10_000
SCALE_LIMIT = 1e300


@dataclass(frozen=True)
class SymmetricWeights:
    """S_k = sum_{|I| = k} prod_{m in I} b_m prod_{m not in I} a_m, k = 0..d.

    `values * exp(log_scale)` gives the true coefficients; `log_scale` is
    nonzero only when the scaling guard fired. For batched input both carry a
    leading row axis.
    """

    values: np.ndarray
    log_scale: Union[float, np.ndarray] = 0.0

    def unscaled(self) -> np.ndarray:
        scale = np.exp(np.asarray(self.log_scale))
        return self.values * (scale[..., None] if np.ndim(scale) else scale)


def symmetric_weight_dp(a, b) -> SymmetricWeights:
    """Expand prod_m (a_m + b_m x) and return its coefficients.

    Args:
        a: Factors taken when i_m = 0, shape (d,) or (n, d)
        b: Factors taken when i_m = 1, same shape as `a`

    Returns:
        SymmetricWeights with coefficients of x^0..x^d (per row when batched)

    Raises:
        InvalidInputError: If the shapes differ or d exceeds MAX_DP_D
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim not in (1, 2):
        raise InvalidInputError(f"Factor arrays must share a 1-D or 2-D shape, got {a.shape} and {b.shape}",
                                invariant="dp-shape")
    single = a.ndim == 1
    a2, b2 = np.atleast_2d(a), np.atleast_2d(b)
    n, d = a2.shape
    if d > MAX_DP_D:
        raise InvalidInputError(f"Symmetric DP supports d <= {MAX_DP_D}, got {d}", invariant="dp-size")

    S = np.zeros((n, d + 1))
    S[:, 0] = 1.0
    log_scale = np.zeros(n)
    for m in range(d):
        updated = S * a2[:, m, None]
        updated[:, 1:] += S[:, :-1] * b2[:, m, None]
        S = updated
        peak = np.abs(S).max(axis=1)
        big = peak > SCALE_LIMIT
        if big.any():
            S[big] /= peak[big, None]
            log_scale[big] += np.log(peak[big])

    if single:
        return SymmetricWeights(S[0], float(log_scale[0]))
    return SymmetricWeights(S, log_scale)


def pmf_weights(model: CopulaModel) -> np.ndarray:
    """Per-outcome probabilities f(i) = p_k / C(d, k), indexed by k = |i|."""
    d = model.d
    k = np.arange(d + 1)
    log_binom = special.gammaln(d + 1) - special.gammaln(k + 1) - special.gammaln(d - k + 1)
    with np.errstate(divide="ignore"):
        return np.exp(np.log(model.pmf.as_array()) - log_binom)


def _as_points(points, d: int, closed: bool) -> np.ndarray:
    u = np.asarray(points, dtype=float)
    if u.ndim == 1:
        u = u[None, :]
    if u.ndim != 2 or u.shape[1] != d:
        raise InvalidInputError(f"Points must have {d} coordinates, got shape {np.shape(points)}",
                                invariant="point-length")
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("Points must be finite", invariant="point-finite")
    if closed:
        bad = (u < 0.0) | (u > 1.0)
        bounds = "[0, 1]"
    else:
        bad = (u <= 0.0) | (u >= 1.0)
        bounds = "(0, 1)"
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise InvalidInputError(
            f"Coordinate {col} of point {row} is {u[row, col]!r}, outside {bounds}", invariant="point-range"
        )
    return u


def _combine(weights: SymmetricWeights, f: np.ndarray) -> np.ndarray:
    return (weights.values @ f) * np.exp(weights.log_scale)


def copula_cdf_many(model: ModelInput, points, d: Optional[int] = None) -> np.ndarray:
    """C(u) for each row of an (n, d) array of points in [0, 1]^d."""
    model = canonicalize(model, d)
    u = _as_points(points, model.d, closed=True)
    weights = symmetric_weight_dp(u * (2.0 - u), u * u)
    return _combine(weights, pmf_weights(model))


def copula_cdf(model: ModelInput, pt: Sequence[float], d: Optional[int] = None) -> float:
    """C(u) = sum_i f(i) prod_m u_m (1 + (-1)^{i_m} (1 - u_m)).

    Args:
        model: Any parameterization accepted by `canonicalize`
        pt: Point in [0, 1]^d
        d: Dimension, needed only for mixing specifications

    Returns:
        Copula cdf at `pt`

    Raises:
        InvalidInputError: If the point is outside [0, 1]^d or has the wrong length
    """
    return float(copula_cdf_many(model, [pt], d)[0])


def copula_density_many(model: ModelInput, points, d: Optional[int] = None) -> np.ndarray:
    """c(u) for each row of an (n, d) array of points in (0, 1)^d."""
    model = canonicalize(model, d)
    u = _as_points(points, model.d, closed=False)
    weights = symmetric_weight_dp(2.0 * (1.0 - u), 2.0 * u)
    return _combine(weights, pmf_weights(model))


def copula_density(model: ModelInput, pt: Sequence[float], d: Optional[int] = None) -> float:
    """c(u) = sum_i f(i) prod_l (1 + (-1)^{i_l} (1 - 2 u_l)) at an interior point."""
    return float(copula_density_many(model, [pt], d)[0])


def log_likelihood(model: ModelInput, data, d: Optional[int] = None) -> float:
    """Sum of log densities over the rows of `data`.

    Raises:
        EvaluationError: If the density is not positive at some row
    """
    density = copula_density_many(model, data, d)
    bad = np.flatnonzero(~(density > 0.0))
    if bad.size:
        row = int(bad[0])
        raise EvaluationError(f"Density at row {row} is {density[row]!r}; log-likelihood is -inf", row=row)
    return math.fsum(np.log(density))


def _brute_force(model: CopulaModel, u: np.ndarray, zero_factor, one_factor) -> float:
    d = model.d
    if d > ORACLE_MAX_D:
        raise CapabilityError(f"Enumeration oracle supports d <= {ORACLE_MAX_D}, got {d}", invariant="oracle-size")
    codes = np.arange(2 ** d, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(d)) & 1).astype(bool)
    f = pmf_weights(model)[bits.sum(axis=1)]
    factors = np.where(bits, one_factor(u), zero_factor(u))
    return float(np.dot(f, factors.prod(axis=1)))


def copula_cdf_brute(model: ModelInput, pt: Sequence[float], d: Optional[int] = None) -> float:
    """Literal 2^d summation of the cdf; oracle for `copula_cdf`."""
    model = canonicalize(model, d)
    u = _as_points(pt, model.d, closed=True)[0]
    return _brute_force(model, u, lambda x: x * (2.0 - x), lambda x: x * x)


def copula_density_brute(model: ModelInput, pt: Sequence[float], d: Optional[int] = None) -> float:
    """Literal 2^d summation of the density; oracle for `copula_density`."""
    model = canonicalize(model, d)
    u = _as_points(pt, model.d, closed=False)[0]
    return _brute_force(model, u, lambda x: 2.0 * (1.0 - x), lambda x: 2.0 * x)
