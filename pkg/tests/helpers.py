"""Helpers shared by the test modules."""

import csv
from fractions import Fraction
from pathlib import Path

import numpy as np

from efgm.geometry import enumerate_extreme_points
from efgm.representations import NdPmf

GOLDEN_DIR = Path(__file__).parent / "golden"

# Dependence parameters of the study model rounded to 4 decimals
ROUNDED_STUDY_THETA = (0.0667, 0.1407, 0.0709, 0.0085, 0.0442, 0.0874, -0.0133, -0.1067, 0.8667)


def random_nd_pmf(d: int, rng: np.random.Generator) -> NdPmf:
    """Random interior point of N_d: Dirichlet weights over the extreme points."""
    points = enumerate_extreme_points(d)
    weights = rng.dirichlet(np.ones(len(points)))
    p = sum(w * pt.pmf.as_array() for w, pt in zip(weights, points))
    return NdPmf(d, p / p.sum())


def read_golden(name: str):
    """Rows of a golden CSV as dictionaries of strings."""
    with open(GOLDEN_DIR / name, newline="") as f:
        return list(csv.DictReader(f))


def frac(text: str) -> float:
    """Parse an exact fraction string such as '-5/231'."""
    return float(Fraction(text))
