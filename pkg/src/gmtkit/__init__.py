"""Quantitative density, Riesz and beta-number statistics for atomic measures."""
