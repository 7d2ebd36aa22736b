"""Fragments of first-order formulas and the reductions between their theories."""
