"""Repeated sample-then-estimate studies of the EM estimator."""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from efgm.errors import InvalidInputError
from efgm.estimation import DEFAULT_MAX_ITER, DEFAULT_TOL, em_fit
from efgm.representations import CopulaModel, ModelInput, NdPmf, canonicalize
from efgm.sampling import sample

logger = logging.getLogger(__name__)

# N_10 law whose theta-vector rounds to (0.0667, 0.1407, 0.0709, 0.0085, 0.0442, 0.0874, -0.0133, -0.1067, 0.8667)
REFERENCE_PMF_D10 = tuple(Fraction(v) for v in ("1/18", "1/15", "1/12", "0", "0", "0", "143/180", "0", "0", "0", "0"))

SUMMARY_ROWS = (
    "Real parameter",
    "1st quartile",
    "Median",
    "Mean",
    "3rd quartile",
    "Interquartile range",
    "Standard deviation",
)
MONOTONE_SLACK = 1e-10


def reference_model_d10() -> CopulaModel:
    return CopulaModel.from_nd_pmf(NdPmf(10, [float(v) for v in REFERENCE_PMF_D10]))


def rep_seeds(seed: int, reps: int) -> List[int]:
    """Per-replication 64-bit seeds derived from one master seed."""
    state = np.random.SeedSequence(seed).generate_state(reps, dtype=np.uint64)
    return [int(s) for s in state]


@dataclass
class StudyResult:
    """Summary table, per-replication estimates and the step log of a study."""

    summary: pd.DataFrame
    estimates: pd.DataFrame
    steps: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def theta_columns(self) -> List[str]:
        return [c for c in self.estimates.columns if c.startswith("theta_")]


class SimulationStudy:
    """Samples `reps` data sets from a model and fits each by EM."""

    def __init__(
        self,
        model: ModelInput,
        n: int,
        reps: int,
        seed: int,
        d: Optional[int] = None,
        tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
        threads: int = 1,
    ):
        """
        Initialize a study.

        Args:
            model: True model to sample from
            n: Rows per replication
            reps: Number of replications, at least 1
            seed: Master seed; replication seeds come from `rep_seeds`
            d: Dimension, needed only for mixing specifications
            tol: EM tolerance
            max_iter: EM iteration cap
            threads: Worker threads for sampling and the xi precompute
        """
        if isinstance(reps, bool) or int(reps) != reps or reps < 1:
            raise InvalidInputError(f"reps must be a positive integer, got {reps!r}", invariant="study-reps")
        self.model = canonicalize(model, d)
        self.n = n
        self.reps = int(reps)
        self.seed = seed
        self.tol = tol
        self.max_iter = max_iter
        self.threads = threads
        self.steps: List[Dict[str, Any]] = []

    def run(self) -> StudyResult:
        """
        Run every replication and summarise the estimates.

        Returns:
            StudyResult; deterministic given the seed
        """
        d = self.model.d
        columns = [f"theta_{k}" for k in range(2, d + 1)]
        self.steps = []
        records = []
        for rep, rep_seed in enumerate(rep_seeds(self.seed, self.reps)):
            batch = sample(self.model, self.n, rep_seed, threads=self.threads)
            fit = em_fit(batch.rows, d, tol=self.tol, max_iter=self.max_iter, threads=self.threads)
            monotone = bool(np.all(np.diff(fit.loglik_trace) >= -MONOTONE_SLACK))
            self.steps.append({
                "name": f"replication_{rep}",
                "status": "converged" if fit.converged else "max_iter",
                "details": {"seed": rep_seed, "iterations": fit.iterations, "loglik": fit.loglik,
                            "monotone": monotone},
            })
            records.append({"rep": rep, "seed": rep_seed, **dict(zip(columns, fit.theta.theta)),
                            "loglik": fit.loglik, "iterations": fit.iterations,
                            "converged": fit.converged, "monotone": monotone})
            logger.info(f"Replication {rep + 1}/{self.reps}: {fit.iterations} EM iterations")

        estimates = pd.DataFrame.from_records(records)
        values = estimates[columns].to_numpy()
        q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75], axis=0)
        sd = values.std(axis=0, ddof=1) if self.reps > 1 else np.zeros(len(columns))
        summary = pd.DataFrame(
            [self.model.theta.as_array(), q1, median, values.mean(axis=0), q3, q3 - q1, sd],
            index=list(SUMMARY_ROWS),
            columns=columns,
        )
        return StudyResult(summary=summary, estimates=estimates, steps=list(self.steps))

    def get_steps(self) -> List[Dict[str, Any]]:
        return self.steps


def simulation_study(
    d: int,
    n: int,
    reps: int,
    seed: int,
    model: Optional[ModelInput] = None,
    **options: Any,
) -> StudyResult:
    """
    Repeated sample-and-fit study summarised per dependence parameter.

    Without `model`, d must be 10 and the reference model is used.

    Raises:
        InvalidInputError: If no model is given for d != 10, or the model's
            dimension differs from d
    """
    if model is None:
        if d != 10:
            raise InvalidInputError(f"No reference model for d={d}; pass a model", invariant="study-model")
        model = reference_model_d10()
    study = SimulationStudy(model, n, reps, seed, d=d, **options)
    if study.model.d != d:
        raise InvalidInputError(f"Model has d={study.model.d}, study asked for d={d}", invariant="dimension")
    return study.run()
