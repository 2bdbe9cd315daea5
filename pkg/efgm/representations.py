"""Parameterizations of exchangeable FGM copulas and the maps between them.

An eFGM copula of dimension d is fixed by any one of:

* the dependence parameters (theta_2, ..., theta_d),
* the pmf (p_0, ..., p_d) of N_d, the number of ones in the underlying
  exchangeable symmetric Bernoulli vector,
* the joint success probabilities (zeta_0, ..., zeta_d),
* a mixing distribution Lambda on [0, 1] with mean 1/2.

Every construction normalizes to the (d, NdPmf) pair held by CopulaModel.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, special, stats

from efgm.errors import CapabilityError, InadmissibleError, InvalidInputError, NumericError

logger = logging.getLogger(__name__)

EQ_TOL = 1e-12
ROUND_TRIP_TOL = 1e-10
CLAMP_TOL = 1e-12
ORACLE_MAX_D = 20
LST_MAX_ITER = 200
LST_LOWER = 1e-12


def _check_dimension(d: int) -> int:
    if isinstance(d, bool) or int(d) != d:
        raise InvalidInputError(f"Dimension must be an integer, got {d!r}", invariant="dimension")
    d = int(d)
    if d < 2:
        raise InvalidInputError(f"Dimension must be at least 2, got {d}", invariant="dimension")
    return d


def _clamp_probabilities(values: np.ndarray, invariant: str) -> np.ndarray:
    """Set values in (-CLAMP_TOL, 0) to zero and reject anything more negative."""
    worst = int(np.argmin(values))
    if values[worst] < -CLAMP_TOL:
        raise InadmissibleError(
            f"Probability at index {worst} is {values[worst]:.3e} < 0",
            invariant=invariant,
            index=worst,
        )
    return np.where(values < 0.0, 0.0, values)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@lru_cache(maxsize=None)
def krawtchouk_table(d: int) -> Tuple[Tuple[int, ...], ...]:
    """Exact integer sign sums K_k(m) = sum_i (-1)^i C(m, i) C(d - m, k - i).

    Row k, column m (both 0..d). Given m coordinates with epsilon_j = -1, K_k(m)
    is the sum over all k-subsets of the product of their signs.
    """
    return tuple(
        tuple(
            sum((-1) ** i * math.comb(m, i) * math.comb(d - m, k - i) for i in range(k + 1))
            for m in range(d + 1)
        )
        for k in range(d + 1)
    )


@lru_cache(maxsize=None)
def _theta_from_pmf_matrix(d: int) -> np.ndarray:
    # R[k - 2, m] = K_k(m) / C(d, k); every entry lies in [-1, 1]
    table = krawtchouk_table(d)
    return _frozen(np.array(
        [[float(Fraction(table[k][m], math.comb(d, k))) for m in range(d + 1)] for k in range(2, d + 1)]
    ))


@lru_cache(maxsize=None)
def _pmf_from_theta_matrix(d: int) -> Tuple[np.ndarray, np.ndarray]:
    # p_m = C(d, m) 2^-d (1 + sum_k theta_k K_k(m))
    table = krawtchouk_table(d)
    scale = 2 ** d
    base = np.array([float(Fraction(math.comb(d, m), scale)) for m in range(d + 1)])
    slope = np.array(
        [[float(Fraction(math.comb(d, m) * table[k][m], scale)) for k in range(2, d + 1)] for m in range(d + 1)]
    )
    return _frozen(base), _frozen(slope)


@lru_cache(maxsize=None)
def margin_matrix(d: int) -> np.ndarray:
    """K_k(m) as floats, shape (d + 1, d - 1), columns k = 2..d."""
    table = krawtchouk_table(d)
    return _frozen(np.array([[float(table[k][m]) for k in range(2, d + 1)] for m in range(d + 1)]))


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThetaVector:
    """The d - 1 dependence parameters (theta_2, ..., theta_d).

    Only the length and finiteness are enforced here; admissibility, which
    implies |theta_k| <= 1, is the job of `efgm.geometry.admissibility_check`.
    Index with k in 2..d: ``t[2]`` is theta_2.
    """

    d: int
    theta: Tuple[float, ...]

    def __post_init__(self):
        d = _check_dimension(self.d)
        values = tuple(float(v) for v in self.theta)
        if len(values) != d - 1:
            raise InvalidInputError(
                f"Expected {d - 1} dependence parameters for d={d}, got {len(values)}",
                invariant="theta-length",
            )
        if not all(math.isfinite(v) for v in values):
            raise InvalidInputError("Dependence parameters must be finite", invariant="theta-finite")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "theta", values)

    def __getitem__(self, k: int) -> float:
        if not 2 <= k <= self.d:
            raise IndexError(f"theta_k is defined for k in 2..{self.d}, got {k}")
        return self.theta[k - 2]

    def as_array(self) -> np.ndarray:
        return np.array(self.theta)

    @property
    def within_unit_box(self) -> bool:
        return all(abs(v) <= 1.0 + EQ_TOL for v in self.theta)

    @classmethod
    def independence(cls, d: int) -> "ThetaVector":
        return cls(d, (0.0,) * (d - 1))


@dataclass(frozen=True)
class ZetaVector:
    """Joint success probabilities zeta_k = Pr(I_1 = ... = I_k = 1), k = 0..d."""

    d: int
    zeta: Tuple[float, ...]

    def __post_init__(self):
        d = _check_dimension(self.d)
        values = [float(v) for v in self.zeta]
        if len(values) != d + 1:
            raise InvalidInputError(
                f"Expected {d + 1} zeta values for d={d}, got {len(values)}", invariant="zeta-length"
            )
        if abs(values[0] - 1.0) > EQ_TOL:
            raise InvalidInputError(f"zeta_0 must be 1, got {values[0]}", invariant="zeta-0")
        if abs(values[1] - 0.5) > EQ_TOL:
            raise InvalidInputError(f"zeta_1 must be 1/2, got {values[1]}", invariant="zeta-1")
        values[0], values[1] = 1.0, 0.5
        for k in range(1, d):
            if values[k + 1] < -EQ_TOL or values[k + 1] > values[k] + EQ_TOL:
                raise InvalidInputError(
                    f"zeta must satisfy 0 <= zeta_{k + 1} <= zeta_{k}; got {values[k + 1]} after {values[k]}",
                    invariant="zeta-monotone",
                )
            values[k + 1] = min(max(values[k + 1], 0.0), values[k])
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "zeta", tuple(values))

    def as_array(self) -> np.ndarray:
        return np.array(self.zeta)

    @classmethod
    def independence(cls, d: int) -> "ZetaVector":
        return cls(d, tuple(0.5 ** k for k in range(d + 1)))


@dataclass(frozen=True)
class NdPmf:
    """Probability vector (p_0, ..., p_d) of N_d with mean d/2."""

    d: int
    p: Tuple[float, ...]

    def __post_init__(self):
        d = _check_dimension(self.d)
        values = np.asarray(self.p, dtype=float)
        if values.shape != (d + 1,):
            raise InvalidInputError(
                f"Expected {d + 1} probabilities for d={d}, got shape {values.shape}", invariant="nd-pmf-length"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("Probabilities must be finite", invariant="nd-pmf-finite")
        values = _clamp_probabilities(values, invariant="nd-pmf-nonnegative")
        total = math.fsum(values)
        if abs(total - 1.0) > EQ_TOL:
            raise InvalidInputError(f"Probabilities sum to {total!r}, not 1", invariant="nd-pmf-sum")
        mean = math.fsum(np.arange(d + 1) * values)
        if abs(mean - d / 2) > EQ_TOL * max(1.0, d / 2):
            raise InvalidInputError(f"Mean of N_d is {mean!r}, not d/2 = {d / 2}", invariant="nd-pmf-mean")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "p", tuple(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.array(self.p)

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(k for k, v in enumerate(self.p) if v > 0.0)


def independence_nd_pmf(d: int) -> NdPmf:
    """Binomial(d, 1/2), the N_d law of the independence copula."""
    d = _check_dimension(d)
    return NdPmf(d, stats.binom.pmf(np.arange(d + 1), d, 0.5))


# ---------------------------------------------------------------------------
# Mixing distributions
# ---------------------------------------------------------------------------


class MixingSpec(ABC):
    """Mixing variable Lambda on [0, 1] with E[Lambda] = 1/2.

    Conditionally on Lambda the Bernoulli coordinates are i.i.d. Bernoulli(Lambda),
    so zeta_k = E[Lambda^k] and theta_k = (-2)^k E[(Lambda - 1/2)^k].
    """

    @abstractmethod
    def moments(self, d: int) -> np.ndarray:
        """Raw moments E[Lambda^k] for k = 0..d."""

    def central_moments(self, d: int) -> np.ndarray:
        """Moments E[(Lambda - 1/2)^k] for k = 0..d, by binomial expansion."""
        raw = self.moments(d)
        return np.array([
            math.fsum(math.comb(k, l) * raw[l] * (-0.5) ** (k - l) for l in range(k + 1))
            for k in range(d + 1)
        ])

    def nd_pmf(self, d: int) -> NdPmf:
        return nd_pmf_from_zeta(mixing_to_zeta(self, d))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise InvalidInputError(f"{type(self).__name__} does not support random draws", invariant="mixing-sampler")

    def cell_masses(self, n_cells: int) -> Tuple[np.ndarray, np.ndarray]:
        """Atoms and masses of a discretisation of Lambda on n_cells equal cells of [0, 1].

        Atoms are the conditional means E[Lambda | cell], so the discretised law
        keeps the mean 1/2.
        """
        raise NumericError(f"{type(self).__name__} cannot be discretised", invariant="mixing-discretisation")

    def _check_mean(self) -> None:
        mean = float(self.moments(1)[1])
        if abs(mean - 0.5) > EQ_TOL:
            raise InvalidInputError(f"Mixing mean is {mean!r}, not 1/2", invariant="mixing-mean")


@dataclass(frozen=True)
class BetaMixing(MixingSpec):
    """Lambda ~ Beta(alpha, alpha); alpha acts as the dependence parameter."""

    alpha: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidInputError(f"Beta mixing needs alpha > 0, got {self.alpha}", invariant="beta-alpha")
        object.__setattr__(self, "alpha", float(self.alpha))
        self._check_mean()

    def moments(self, d: int) -> np.ndarray:
        a = self.alpha
        ratios = [(a + i) / (2 * a + i) for i in range(d)]
        return np.concatenate([[1.0], np.cumprod(ratios)]) if d > 0 else np.ones(1)

    def central_moments(self, d: int) -> np.ndarray:
        theta = _beta_theta_products(self.alpha, d)
        return np.array([theta[k] / 2.0 ** k for k in range(d + 1)])

    def nd_pmf(self, d: int) -> NdPmf:
        p = stats.betabinom.pmf(np.arange(d + 1), d, self.alpha, self.alpha)
        # betabinom loses the unit sum for large alpha; the law is symmetric about d/2
        p = 0.5 * (p + p[::-1])
        return NdPmf(d, p / math.fsum(p))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.beta(self.alpha, self.alpha, size=size)

    def cell_masses(self, n_cells: int) -> Tuple[np.ndarray, np.ndarray]:
        edges = np.linspace(0.0, 1.0, n_cells + 1)
        a = self.alpha
        # E[Lambda; Lambda <= x] = I_x(a + 1, a) / 2
        return _cells_from_cdf(edges, stats.beta.cdf(edges, a, a), 0.5 * stats.beta.cdf(edges, a + 1.0, a))


@dataclass(frozen=True)
class MadsenMixing(MixingSpec):
    """Madsen's model zeta_k = beta + (1 - beta) alpha'^k with alpha' = (1/2 - beta)/(1 - beta).

    Lambda is two-point: 1 with probability beta, alpha' otherwise.
    """

    beta: float

    def __post_init__(self):
        if not (0.0 <= self.beta <= 0.5):
            raise InvalidInputError(f"Madsen beta must lie in [0, 0.5], got {self.beta}", invariant="madsen-beta")
        object.__setattr__(self, "beta", float(self.beta))
        self._check_mean()

    @property
    def alpha_prime(self) -> float:
        if self.beta == 0.5:
            return 0.0
        return (0.5 - self.beta) / (1.0 - self.beta)

    def moments(self, d: int) -> np.ndarray:
        if self.beta == 0.5:
            return np.array([1.0] + [0.5] * d)
        k = np.arange(d + 1)
        return self.beta + (1.0 - self.beta) * self.alpha_prime ** k

    def central_moments(self, d: int) -> np.ndarray:
        atoms, masses = self.cell_masses(0)
        k = np.arange(d + 1)[:, None]
        return ((atoms - 0.5) ** k * masses).sum(axis=1)

    def nd_pmf(self, d: int) -> NdPmf:
        p = (1.0 - self.beta) * stats.binom.pmf(np.arange(d + 1), d, self.alpha_prime)
        p[d] += self.beta
        return NdPmf(d, p)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.where(rng.random(size) < self.beta, 1.0, self.alpha_prime)

    def cell_masses(self, n_cells: int) -> Tuple[np.ndarray, np.ndarray]:
        return np.array([self.alpha_prime, 1.0]), np.array([1.0 - self.beta, self.beta])


def _cells_from_cdf(edges: np.ndarray, cdf: np.ndarray, partial: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Cell masses and conditional cell means from the cdf and E[Lambda; Lambda <= x] at the edges."""
    masses = np.clip(np.diff(cdf), 0.0, None)
    first = np.diff(partial)
    lower, upper = edges[:-1], edges[1:]
    atoms = (lower + upper) / 2
    filled = masses > 0.0
    atoms[filled] = np.clip(first[filled] / masses[filled], lower[filled], upper[filled])
    return atoms, masses


def solve_lst_rate(psi: Callable[[float], float]) -> float:
    """Find r > 0 with psi(r) = 1/2 by bisection.

    The upper end of the bracket starts at 1 and doubles until psi drops
    below 1/2.

    Raises:
        NumericError: If no sign change can be bracketed or bisection fails
    """
    lower = LST_LOWER
    if psi(lower) - 0.5 <= 0.0:
        raise NumericError("psi is already below 1/2 near zero; no root to bracket", invariant="lst-root")
    upper = 1.0
    for _ in range(LST_MAX_ITER):
        if psi(upper) < 0.5:
            break
        upper *= 2.0
    else:
        raise NumericError("psi never drops below 1/2; no sign change on the bracket", invariant="lst-root")
    try:
        return optimize.bisect(lambda t: psi(t) - 0.5, lower, upper, xtol=1e-15, maxiter=LST_MAX_ITER)
    except (RuntimeError, ValueError) as e:
        raise NumericError(f"Bisection for the LST rate failed: {e}", invariant="lst-root")


@dataclass(frozen=True, eq=False)
class LstMixing(MixingSpec):
    """Lambda = exp(-r Y) for a positive Y with Laplace-Stieltjes transform psi.

    `psi` must be completely monotone with psi(0) = 1; r solves psi(r) = 1/2.
    `sampler(rng, size)` draws Y when random draws are needed.
    """

    psi: Callable[[float], float]
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    name: str = "lst"

    @cached_property
    def rate(self) -> float:
        return solve_lst_rate(self.psi)

    def moments(self, d: int) -> np.ndarray:
        r = self.rate
        return np.array([1.0] + [float(self.psi(k * r)) for k in range(1, d + 1)])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.sampler is None:
            return super().sample(rng, size)
        return np.exp(-self.rate * np.asarray(self.sampler(rng, size)))


@dataclass(frozen=True)
class GammaLstMixing(MixingSpec):
    """Y ~ Gamma(shape 1/alpha, rate 1/alpha), psi(t) = (1 + alpha t)^(-1/alpha).

    Larger alpha means a more dispersed Lambda, hence stronger dependence.
    """

    alpha: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidInputError(f"Gamma LST needs alpha > 0, got {self.alpha}", invariant="gamma-alpha")
        object.__setattr__(self, "alpha", float(self.alpha))
        self._check_mean()

    def psi(self, t: float) -> float:
        return (1.0 + self.alpha * t) ** (-1.0 / self.alpha)

    @property
    def rate(self) -> float:
        return (2.0 ** self.alpha - 1.0) / self.alpha

    def moments(self, d: int) -> np.ndarray:
        return np.array([self.psi(k * self.rate) for k in range(d + 1)])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        y = rng.gamma(1.0 / self.alpha, self.alpha, size=size)
        return np.exp(-self.rate * y)

    def cell_masses(self, n_cells: int) -> Tuple[np.ndarray, np.ndarray]:
        edges = np.linspace(0.0, 1.0, n_cells + 1)
        with np.errstate(divide="ignore"):
            thresholds = -np.log(edges) / self.rate
        # Pr(Lambda <= x) = Pr(Y >= -log(x) / r)
        shape = 1.0 / self.alpha
        cdf = stats.gamma.sf(thresholds, shape, scale=self.alpha)
        # E[exp(-rY); Y >= y] = psi(r) Pr(Y' >= y), Y' ~ Gamma(shape, scale alpha / (1 + r alpha))
        partial = 0.5 * stats.gamma.sf(thresholds, shape, scale=self.alpha / (1.0 + self.rate * self.alpha))
        cdf[0], cdf[-1] = 0.0, 1.0
        partial[0], partial[-1] = 0.0, 0.5
        return _cells_from_cdf(edges, cdf, partial)


@dataclass(frozen=True)
class MomentMixing(MixingSpec):
    """Mixing distribution known only through E[Lambda^k], k = 0..K."""

    values: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if len(values) < 2 or abs(values[0] - 1.0) > EQ_TOL:
            raise InvalidInputError("Moment list must start with E[Lambda^0] = 1", invariant="mixing-moments")
        object.__setattr__(self, "values", values)
        self._check_mean()

    def moments(self, d: int) -> np.ndarray:
        if len(self.values) < d + 1:
            raise InvalidInputError(
                f"Need moments up to order {d}, only {len(self.values) - 1} given", invariant="mixing-moments"
            )
        return np.array(self.values[: d + 1])


# ---------------------------------------------------------------------------
# Conversions
# ---------------------------------------------------------------------------


def zeta_to_theta(z: ZetaVector) -> ThetaVector:
    """theta_k = sum_{l=0}^{k} C(k, l) zeta_l (-2)^l for k = 2..d."""
    d = _check_dimension(z.d)
    theta = [
        math.fsum(math.comb(k, l) * (-2) ** l * z.zeta[l] for l in range(k + 1))
        for k in range(2, d + 1)
    ]
    return ThetaVector(d, theta)


def nd_pmf_from_zeta(z: ZetaVector) -> NdPmf:
    """Pr(N_d = k) = C(d, k) sum_l (-1)^l C(d - k, l) zeta_{k+l}.

    Raises:
        InadmissibleError: If some probability is below -1e-12
    """
    d = z.d
    p = np.array([
        math.comb(d, k) * math.fsum((-1) ** l * math.comb(d - k, l) * z.zeta[k + l] for l in range(d - k + 1))
        for k in range(d + 1)
    ])
    try:
        p = _clamp_probabilities(p, invariant="inadmissible-zeta")
    except InadmissibleError as e:
        raise InadmissibleError(
            f"zeta vector does not define a distribution: Pr(N_d = {e.index}) = {p[e.index]:.3e}",
            invariant="inadmissible-zeta",
            index=e.index,
        )
    return NdPmf(d, p)


def zeta_from_nd_pmf(p: NdPmf) -> ZetaVector:
    """zeta_k = sum_m p_m C(m, k) / C(d, k)."""
    d = p.d
    zeta = [
        math.fsum(p.p[m] * float(Fraction(math.comb(m, k), math.comb(d, k))) for m in range(k, d + 1))
        for k in range(d + 1)
    ]
    return ZetaVector(d, zeta)


def bernoulli_pmf_point(p: NdPmf, bits: Sequence[int]) -> float:
    """Pr(I = bits) = Pr(N_d = |bits|) / C(d, |bits|), by exchangeability."""
    bits = list(bits)
    if len(bits) != p.d:
        raise InvalidInputError(f"Expected {p.d} bits, got {len(bits)}", invariant="bits-length")
    if any(b not in (0, 1) for b in bits):
        raise InvalidInputError("Bits must be 0 or 1", invariant="bits-binary")
    ones = sum(bits)
    return p.p[ones] / math.comb(p.d, ones)


def theta_from_nd_pmf(p: NdPmf) -> ThetaVector:
    """Dependence parameters of the copula whose N_d law is `p`.

    Evaluates theta_k = sum_m p_m K_k(m) / C(d, k), the zeta_from_nd_pmf then
    zeta_to_theta composition written without alternating-sign cancellation.
    """
    return ThetaVector(p.d, _theta_from_pmf_matrix(p.d) @ p.as_array())


def _bit_matrix(d: int) -> np.ndarray:
    codes = np.arange(2 ** d, dtype=np.int64)
    return ((codes[:, None] >> np.arange(d)) & 1).astype(np.int8)


def theta_oracle(p: NdPmf, method: str = "product") -> ThetaVector:
    """Brute-force theta over all 2^d Bernoulli outcomes.

    Args:
        p: N_d pmf
        method: "product" for (-2)^k E[prod (I_j - 1/2)],
            "parity" for E[(-1)^(I_1 + ... + I_k)]

    Returns:
        ThetaVector computed by exact enumeration

    Raises:
        CapabilityError: If d exceeds ORACLE_MAX_D
    """
    d = p.d
    if d > ORACLE_MAX_D:
        raise CapabilityError(f"Enumeration oracle supports d <= {ORACLE_MAX_D}, got {d}", invariant="oracle-size")
    bits = _bit_matrix(d)
    counts = bits.sum(axis=1)
    weights = p.as_array()[counts] / np.array([math.comb(d, int(c)) for c in range(d + 1)])[counts]
    if method == "product":
        factors = np.cumprod(bits - 0.5, axis=1)
        theta = [(-2.0) ** k * np.dot(weights, factors[:, k - 1]) for k in range(2, d + 1)]
    elif method == "parity":
        partial = np.cumsum(bits, axis=1)
        signs = 1 - 2 * (partial & 1)
        theta = [np.dot(weights, signs[:, k - 1]) for k in range(2, d + 1)]
    else:
        raise InvalidInputError(f"Unknown oracle method: {method}", invariant="oracle-method")
    return ThetaVector(d, theta)


def theta_to_nd_pmf(t: ThetaVector) -> NdPmf:
    """N_d pmf from dependence parameters.

    Raises:
        InadmissibleError: If theta is outside T_d; `index` is the violating m
    """
    base, slope = _pmf_from_theta_matrix(t.d)
    p = base + slope @ t.as_array()
    worst = int(np.argmin(p))
    if p[worst] < -CLAMP_TOL:
        raise InadmissibleError(
            f"Inadmissible dependence parameters: Pr(N_d = {worst}) = {p[worst]:.3e} < 0",
            invariant="theta-admissible",
            index=worst,
        )
    return NdPmf(t.d, np.where(p < 0.0, 0.0, p))


def mixing_to_zeta(m: MixingSpec, d: int) -> ZetaVector:
    """zeta_k = E[Lambda^k]."""
    d = _check_dimension(d)
    return ZetaVector(d, m.moments(d))


def theta_from_mixing(m: MixingSpec, d: int) -> ThetaVector:
    """theta_k = (-2)^k E[(Lambda - 1/2)^k]."""
    d = _check_dimension(d)
    central = m.central_moments(d)
    return ThetaVector(d, [(-2.0) ** k * central[k] for k in range(2, d + 1)])


def _beta_theta_products(alpha: float, d: int) -> np.ndarray:
    theta = np.zeros(d + 1)
    theta[0] = 1.0
    running = 1.0
    for k in range(2, d + 1, 2):
        l = k // 2
        running *= (2 * l - 1) / (2 * alpha + 2 * l - 1)
        theta[k] = running
    return theta


def beta_family_theta(alpha: float, d: int) -> ThetaVector:
    """Beta(alpha, alpha) mixing: theta_k = prod_{l=1}^{k/2} (2l - 1)/(2 alpha + 2l - 1) for even k, 0 for odd k."""
    d = _check_dimension(d)
    if not (math.isfinite(alpha) and alpha > 0):
        raise InvalidInputError(f"Beta family needs alpha > 0, got {alpha}", invariant="beta-alpha")
    return ThetaVector(d, _beta_theta_products(float(alpha), d)[2:])


def beta_family_theta_beta_ratio(alpha: float, k: int) -> float:
    """theta_k = B(alpha + 1/2, (k + 1)/2) / B(alpha + (k + 1)/2, 1/2) for even k, 0 for odd k."""
    if not alpha > 0:
        raise InvalidInputError(f"Beta family needs alpha > 0, got {alpha}", invariant="beta-alpha")
    if k % 2:
        return 0.0
    return math.exp(special.betaln(alpha + 0.5, (k + 1) / 2) - special.betaln(alpha + (k + 1) / 2, 0.5))


def madsen_theta(beta: float, d: int) -> ThetaVector:
    """theta_k = beta (-1)^k + (1 - beta)(1 - (1 - 2 beta)/(1 - beta))^k."""
    d = _check_dimension(d)
    spec = MadsenMixing(beta)
    ratio = 1.0 - 2.0 * spec.alpha_prime
    return ThetaVector(d, [beta * (-1) ** k + (1.0 - beta) * ratio ** k for k in range(2, d + 1)])


# ---------------------------------------------------------------------------
# Canonical model
# ---------------------------------------------------------------------------

ModelInput = Union["CopulaModel", ThetaVector, ZetaVector, NdPmf, MixingSpec]


@dataclass(frozen=True, eq=False)
class CopulaModel:
    """An eFGM copula held in canonical form (d, NdPmf).

    `source` records which parameterization the model was built from.
    """

    pmf: NdPmf
    source: str = "ndpmf"

    @property
    def d(self) -> int:
        return self.pmf.d

    @cached_property
    def theta(self) -> ThetaVector:
        return theta_from_nd_pmf(self.pmf)

    @cached_property
    def zeta(self) -> ZetaVector:
        return zeta_from_nd_pmf(self.pmf)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CopulaModel):
            return NotImplemented
        return self.pmf == other.pmf

    def __hash__(self) -> int:
        return hash(self.pmf)

    @classmethod
    def from_theta(cls, t: ThetaVector) -> "CopulaModel":
        return cls(theta_to_nd_pmf(t), source="theta")

    @classmethod
    def from_zeta(cls, z: ZetaVector) -> "CopulaModel":
        return cls(nd_pmf_from_zeta(z), source="zeta")

    @classmethod
    def from_nd_pmf(cls, p: NdPmf) -> "CopulaModel":
        return cls(p, source="ndpmf")

    @classmethod
    def from_mixing(cls, m: MixingSpec, d: int) -> "CopulaModel":
        return cls(m.nd_pmf(_check_dimension(d)), source=type(m).__name__)

    @classmethod
    def independence(cls, d: int) -> "CopulaModel":
        return cls(independence_nd_pmf(d), source="independence")


def canonicalize(model: ModelInput, d: Optional[int] = None) -> CopulaModel:
    """Normalize any supported parameterization to a CopulaModel.

    Canonicalizing a CopulaModel returns it unchanged. Mixing specs need `d`.
    """
    if isinstance(model, CopulaModel):
        return model
    if isinstance(model, ThetaVector):
        return CopulaModel.from_theta(model)
    if isinstance(model, ZetaVector):
        return CopulaModel.from_zeta(model)
    if isinstance(model, NdPmf):
        return CopulaModel.from_nd_pmf(model)
    if isinstance(model, MixingSpec):
        if d is None:
            raise InvalidInputError("A mixing specification needs the dimension d", invariant="dimension")
        return CopulaModel.from_mixing(model, d)
    raise InvalidInputError(f"Unsupported model type: {type(model).__name__}", invariant="model-type")
