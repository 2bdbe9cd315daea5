"""Unit tests for study module."""

import numpy as np
import pandas as pd
import pytest

from efgm.errors import InvalidInputError
from efgm.estimation import em_fit
from efgm.representations import BetaMixing, CopulaModel, ThetaVector
from efgm.sampling import sample
from efgm.study import (
    REFERENCE_PMF_D10,
    SUMMARY_ROWS,
    SimulationStudy,
    rep_seeds,
    simulation_study,
)
from tests.helpers import ROUNDED_STUDY_THETA


@pytest.fixture
def small_model():
    """Three-dimensional Beta(1, 1) mixing model."""
    return CopulaModel.from_mixing(BetaMixing(1.0), 3)


class TestReferenceModel:
    """Test the ten-dimensional study model."""

    def test_pmf_is_exact(self):
        """Test the reference N_10 law sums to one with mean 5."""
        assert sum(REFERENCE_PMF_D10) == 1
        assert sum(m * p for m, p in enumerate(REFERENCE_PMF_D10)) == 5

    def test_theta_rounds_to_reference_row(self, study_model):
        """Test theta rounds to the 4-decimal values."""
        assert np.allclose(np.round(study_model.theta.as_array(), 4), ROUNDED_STUDY_THETA, atol=1e-12)


class TestRepSeeds:
    """Test per-replication seed derivation."""

    def test_deterministic_and_distinct(self):
        """Test seeds are reproducible, distinct and 64-bit."""
        seeds = rep_seeds(42, 10)
        assert seeds == rep_seeds(42, 10)
        assert len(set(seeds)) == 10
        assert all(0 <= s < 2 ** 64 for s in seeds)
        assert rep_seeds(43, 10) != seeds

    def test_prefix_stable(self):
        """Test adding replications keeps the earlier seeds."""
        assert rep_seeds(7, 5) == rep_seeds(7, 8)[:5]


class TestSimulationStudy:
    """Test repeated sample-and-fit runs."""

    def test_summary_layout(self, small_model):
        """Test the summary rows and theta columns."""
        result = SimulationStudy(small_model, n=500, reps=3, seed=1).run()
        assert list(result.summary.index) == list(SUMMARY_ROWS)
        assert list(result.summary.columns) == ["theta_2", "theta_3"]
        assert result.theta_columns == ["theta_2", "theta_3"]
        assert len(result.estimates) == 3
        assert np.allclose(result.summary.loc["Real parameter"], small_model.theta.as_array())

    def test_summary_statistics(self, small_model):
        """Test the summary rows are the column statistics of the estimates."""
        result = SimulationStudy(small_model, n=500, reps=5, seed=2).run()
        values = result.estimates["theta_2"]
        summary = result.summary["theta_2"]
        assert summary["Mean"] == pytest.approx(values.mean())
        assert summary["Median"] == pytest.approx(values.median())
        assert summary["Standard deviation"] == pytest.approx(values.std(ddof=1))
        assert summary["Interquartile range"] == pytest.approx(summary["3rd quartile"] - summary["1st quartile"])

    def test_deterministic(self, small_model):
        """Test the same seed reproduces the study."""
        first = SimulationStudy(small_model, n=400, reps=2, seed=9).run()
        second = SimulationStudy(small_model, n=400, reps=2, seed=9).run()
        pd.testing.assert_frame_equal(first.estimates, second.estimates)
        pd.testing.assert_frame_equal(first.summary, second.summary)

    def test_single_replication_equals_one_fit(self, small_model):
        """Test reps = 1 reproduces a direct sample-and-fit call."""
        result = SimulationStudy(small_model, n=800, reps=1, seed=5).run()
        batch = sample(small_model, 800, rep_seeds(5, 1)[0])
        fit = em_fit(batch.rows, 3)
        assert np.allclose(result.estimates[["theta_2", "theta_3"]].iloc[0], fit.theta.as_array(), rtol=0, atol=0)
        assert np.all(result.summary.loc["Standard deviation"] == 0.0)

    def test_steps_and_monotone_flag(self, small_model):
        """Test one step per replication and a monotone trace in each."""
        study = SimulationStudy(small_model, n=300, reps=4, seed=3)
        result = study.run()
        steps = study.get_steps()
        assert len(steps) == 4
        assert steps == result.steps
        assert steps[0]["name"] == "replication_0"
        assert result.estimates["monotone"].all()

    def test_invalid_reps(self, small_model):
        """Test reps must be a positive integer."""
        with pytest.raises(InvalidInputError):
            SimulationStudy(small_model, n=100, reps=0, seed=1)

    def test_mixing_model_needs_dimension(self):
        """Test a mixing specification is canonicalised with d."""
        study = SimulationStudy(BetaMixing(2.0), n=200, reps=1, seed=1, d=4)
        assert study.model.d == 4


class TestSimulationStudyFunction:
    """Test the simulation_study entry point."""

    def test_default_model_only_for_d10(self):
        """Test other dimensions need an explicit model."""
        with pytest.raises(InvalidInputError):
            simulation_study(5, 100, 1, seed=1)

    def test_dimension_mismatch(self):
        """Test the model dimension must equal d."""
        with pytest.raises(InvalidInputError):
            simulation_study(4, 100, 1, seed=1, model=ThetaVector(3, [0.0, 0.0]))

    def test_explicit_model(self, small_model):
        """Test a supplied model and options are honoured."""
        result = simulation_study(3, 300, 2, seed=4, model=small_model, tol=1e-6, max_iter=500)
        assert len(result.estimates) == 2

    @pytest.mark.slow
    def test_reference_study(self, study_model):
        """Test a 20-replication study of the reference model."""
        result = simulation_study(10, 10_000, 20, seed=20240917)
        summary = result.summary
        assert summary.loc["Real parameter", "theta_2"] == pytest.approx(study_model.theta[2])
        assert summary.loc["Mean", "theta_2"] == pytest.approx(0.0667, abs=0.01)
        assert summary.loc["Standard deviation", "theta_2"] <= 0.015
        assert summary.loc["Standard deviation", "theta_10"] > summary.loc["Standard deviation", "theta_2"]
        assert result.estimates["monotone"].all()
