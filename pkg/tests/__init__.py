"""Test suite for the exchangeable FGM copula toolkit."""
