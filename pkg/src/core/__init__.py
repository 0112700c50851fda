"""Numerical core: linear algebra, mixing blocks, dynamics, metrics, bounds and oracles."""
