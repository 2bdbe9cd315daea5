"""Dependence bounds (END/EPD) and order checks for eFGM copulas."""

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy import stats

from efgm.errors import CapabilityError, InadmissibleError, InvalidInputError, NumericError
from efgm.evaluation import copula_cdf_many
from efgm.geometry import admissibility_check
from efgm.representations import EQ_TOL, MixingSpec, NdPmf, ThetaVector, _check_dimension

logger = logging.getLogger(__name__)

MIXING_CELLS = 2048
MIXING_TOL = 1e-9
GRID_LEVELS = tuple(round(0.1 * i, 1) for i in range(1, 10))
GRID_MAX_DIMS = 5
HYPERGEOMETRIC_MAX_D = 30

EQUAL = "equal"
ORDERED_LEQ = "ordered-leq"
ORDERED_GEQ = "ordered-geq"
INCOMPARABLE = "incomparable"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class OrderVerdict:
    """Result of an order comparison.

    `relation` is one of equal, ordered-leq, ordered-geq, incomparable or
    inconclusive. `evidence` lists the checks that were run and how they came out.
    """

    relation: str
    evidence: Tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> Dict[str, Any]:
        return {"relation": self.relation, "evidence": list(self.evidence)}


# ---------------------------------------------------------------------------
# Extreme dependence bounds
# ---------------------------------------------------------------------------


def epd_theta(d: int) -> ThetaVector:
    """theta_k = (1 + (-1)^k)/2 for the extreme positive dependence copula."""
    d = _check_dimension(d)
    return ThetaVector(d, [(1 + (-1) ** k) / 2 for k in range(2, d + 1)])


def epd_nd_pmf(d: int) -> NdPmf:
    d = _check_dimension(d)
    p = np.zeros(d + 1)
    p[0] = p[d] = 0.5
    return NdPmf(d, p)


@lru_cache(maxsize=None)
def _end_theta_exact(d: int) -> Tuple[Fraction, ...]:
    # theta_{2j} = prod_{l=1}^{j} (1 - 2l)/(2n - 2l + 1), n = floor((d + 1)/2)
    n = (d + 1) // 2
    values: List[Fraction] = []
    running = Fraction(1)
    for k in range(2, d + 1):
        if k % 2:
            values.append(Fraction(0))
            continue
        l = k // 2
        running *= Fraction(1 - 2 * l, 2 * n - 2 * l + 1)
        values.append(running)
    return tuple(values)


def end_theta(d: int) -> ThetaVector:
    """
    Parameters of the extreme negative dependence copula.

    Odd-order parameters vanish. Even-order ones are the finite products
    prod_{l=1}^{k/2} (1 - 2l)/(2n - 2l + 1) with n = floor((d + 1)/2), so
    dimensions 2j - 1 and 2j share their common entries.

    Args:
        d: Dimension, at least 2

    Returns:
        ThetaVector of the END copula
    """
    d = _check_dimension(d)
    return ThetaVector(d, [float(v) for v in _end_theta_exact(d)])


def end_nd_pmf(d: int) -> NdPmf:
    """N_d of the END copula sits on floor(d/2) and ceil(d/2)."""
    d = _check_dimension(d)
    r = d // 2
    p = np.zeros(d + 1)
    if d % 2:
        p[r] = p[r + 1] = 0.5
    else:
        p[r] = 1.0
    return NdPmf(d, p)


def end_theta_hypergeometric_oracle(d: int, k: int) -> float:
    """
    E[(-1)^X] with X the number of ones among k coordinates of the END vector.

    For even d, X is hypergeometric (d/2 ones among d, k drawn). For odd d the
    END law is an even mixture of the (d - 1)/2 and (d + 1)/2 urns.

    Raises:
        CapabilityError: If d exceeds 30
        InvalidInputError: If k is outside 2..d
    """
    d = _check_dimension(d)
    if d > HYPERGEOMETRIC_MAX_D:
        raise CapabilityError(f"Hypergeometric oracle supports d <= {HYPERGEOMETRIC_MAX_D}, got {d}",
                              invariant="oracle-size")
    if not 2 <= k <= d:
        raise InvalidInputError(f"k must lie in 2..{d}, got {k}", invariant="theta-index")
    x = np.arange(k + 1)
    signs = (-1.0) ** x
    urns = [d // 2] if d % 2 == 0 else [(d - 1) // 2, (d + 1) // 2]
    return math.fsum(math.fsum(signs * stats.hypergeom.pmf(x, d, ones, k)) for ones in urns) / len(urns)


# ---------------------------------------------------------------------------
# Convex order on N_d
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StopLossCurve:
    """E[(N - t)_+] for t = 0..d."""

    values: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if any(b > a + EQ_TOL for a, b in zip(values, values[1:])):
            raise InvalidInputError("Stop-loss curve must be nonincreasing", invariant="stop-loss-monotone")
        object.__setattr__(self, "values", values)

    def as_array(self) -> np.ndarray:
        return np.array(self.values)


def stop_loss_curve(p: NdPmf) -> StopLossCurve:
    support = np.arange(p.d + 1)
    excess = np.maximum(support[None, :] - support[:, None], 0)
    return StopLossCurve(excess @ p.as_array())


def _compare_curves(lhs: np.ndarray, rhs: np.ndarray, tol: float) -> Tuple[bool, bool, float]:
    diff = lhs - rhs
    return bool(np.all(diff <= tol)), bool(np.all(diff >= -tol)), float(np.max(np.abs(diff)))


def _verdict_from(leq: bool, geq: bool, gap: float, subject: str) -> Tuple[str, str]:
    if leq and geq:
        return EQUAL, f"{subject}: stop-loss curves coincide"
    if leq:
        return ORDERED_LEQ, f"{subject}: left stop-loss curve is pointwise below the right"
    if geq:
        return ORDERED_GEQ, f"{subject}: left stop-loss curve is pointwise above the right"
    return INCOMPARABLE, f"{subject}: stop-loss curves cross (max gap {gap:.3e})"


def convex_order_check(p: NdPmf, q: NdPmf) -> OrderVerdict:
    """
    Decide p <=_cx q for two N_d laws.

    Both laws have mean d/2, so pointwise comparison of the stop-loss transforms
    on 0..d is the exact criterion. This is evidence about the sums only; it is
    not a supermodular-order certificate for the copulas.

    Raises:
        InvalidInputError: If the dimensions differ
    """
    if p.d != q.d:
        raise InvalidInputError(f"Dimensions differ: {p.d} vs {q.d}", invariant="dimension")
    leq, geq, gap = _compare_curves(stop_loss_curve(p).as_array(), stop_loss_curve(q).as_array(), EQ_TOL)
    relation, note = _verdict_from(leq, geq, gap, "N_d convex order")
    return OrderVerdict(relation, (note,))


def _mixing_stop_loss(points: np.ndarray, atoms: np.ndarray, masses: np.ndarray) -> np.ndarray:
    return np.maximum(atoms[None, :] - points[:, None], 0.0) @ masses


def _discretise(spec: MixingSpec) -> Tuple[np.ndarray, np.ndarray]:
    atoms, masses = spec.cell_masses(MIXING_CELLS)
    atoms, masses = np.asarray(atoms, dtype=float), np.asarray(masses, dtype=float)
    if not (np.all(np.isfinite(masses)) and masses.min() >= -MIXING_TOL and abs(masses.sum() - 1.0) <= MIXING_TOL):
        raise NumericError(
            f"Discretisation of {type(spec).__name__} has total mass {masses.sum()!r}",
            invariant="mixing-discretisation",
        )
    return atoms, np.clip(masses, 0.0, None)


def mixing_order_check(m: MixingSpec, m2: MixingSpec, d: int) -> OrderVerdict:
    """
    Compare two mixing laws in convex order.

    Each law is discretised on 2048 equal cells of [0, 1] with the conditional
    cell means as atoms; the stop-loss transforms are compared at every cell
    edge and atom. Lambda <=_cx Lambda' implies the induced d-variate copulas
    are supermodular ordered.

    Args:
        m: Left mixing specification
        m2: Right mixing specification
        d: Dimension of the induced copulas

    Returns:
        OrderVerdict

    Raises:
        NumericError: If either law cannot be discretised
    """
    d = _check_dimension(d)
    atoms, masses = _discretise(m)
    atoms2, masses2 = _discretise(m2)
    points = np.unique(np.concatenate([np.linspace(0.0, 1.0, MIXING_CELLS + 1), atoms, atoms2]))
    leq, geq, gap = _compare_curves(
        _mixing_stop_loss(points, atoms, masses), _mixing_stop_loss(points, atoms2, masses2), MIXING_TOL
    )
    relation, note = _verdict_from(leq, geq, gap, "Mixing convex order")
    evidence = [note]
    if relation == ORDERED_LEQ:
        evidence.append(f"Induced {d}-variate eFGM copulas satisfy C <=_sm C'")
    elif relation == ORDERED_GEQ:
        evidence.append(f"Induced {d}-variate eFGM copulas satisfy C' <=_sm C")
    logger.debug(f"Mixing order check {type(m).__name__} vs {type(m2).__name__}: {relation}")
    return OrderVerdict(relation, tuple(evidence))


# ---------------------------------------------------------------------------
# Supermodular order: necessary conditions only
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def concordance_grid(d: int, levels: Tuple[float, ...] = GRID_LEVELS) -> np.ndarray:
    """Points {levels}^min(d, 5), padded with ones to length d."""
    d = _check_dimension(d)
    dims = min(d, GRID_MAX_DIMS)
    core = np.array(list(itertools.product(levels, repeat=dims)))
    grid = np.hstack([core, np.ones((core.shape[0], d - dims))])
    grid.setflags(write=False)
    return grid


def supermodular_necessary_check(t: ThetaVector, t2: ThetaVector) -> OrderVerdict:
    """
    Test necessary conditions for C_t <=_sm C_t2.

    Checks theta_2 <= theta_2' and C(u) <= C'(u) on `concordance_grid(d)`.
    Passing both gives `inconclusive`; a failure gives `incomparable` (the
    order cannot hold in this direction). Supermodular order is never claimed.

    Raises:
        InvalidInputError: If the dimensions differ or a vector is inadmissible
    """
    if t.d != t2.d:
        raise InvalidInputError(f"Dimensions differ: {t.d} vs {t2.d}", invariant="dimension")
    if np.allclose(t.as_array(), t2.as_array(), rtol=0.0, atol=EQ_TOL):
        return OrderVerdict(EQUAL, ("Parameter vectors coincide",))

    evidence: List[str] = []
    passed = True
    if t[2] <= t2[2] + EQ_TOL:
        evidence.append(f"theta_2 = {t[2]:.6g} <= {t2[2]:.6g}: pairwise concordance holds")
    else:
        passed = False
        evidence.append(f"theta_2 = {t[2]:.6g} > {t2[2]:.6g}: pairwise concordance fails")

    grid = concordance_grid(t.d)
    gap = copula_cdf_many(t, grid) - copula_cdf_many(t2, grid)
    worst = int(np.argmax(gap))
    if gap[worst] <= EQ_TOL:
        evidence.append(f"C <= C' at all {len(grid)} grid points")
    else:
        passed = False
        evidence.append(f"C exceeds C' by {gap[worst]:.3e} at u = {grid[worst].tolist()}")

    return OrderVerdict(INCONCLUSIVE if passed else INCOMPARABLE, tuple(evidence))


def spearman_rho_pair(t: ThetaVector) -> float:
    """Spearman's rho of any bivariate margin: theta_2 / 3.

    Raises:
        InadmissibleError: If `t` fails a sign constraint
    """
    report = admissibility_check(t)
    if not report.admissible:
        m = report.worst_m
        raise InadmissibleError(
            f"Spearman's rho needs admissible parameters: g({m}) = {report.margins[m]:.6g} < 0",
            invariant="theta-admissible",
            index=m,
        )
    return t[2] / 3.0
