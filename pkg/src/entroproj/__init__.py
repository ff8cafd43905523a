"""Entropy minimisation under moment constraints, via finite-dimensional duality."""
