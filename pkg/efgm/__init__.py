"""Exchangeable FGM copula toolkit - Core modules."""
