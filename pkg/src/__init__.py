"""Rank Collapse Lab - simulators, bounds and oracles for rank collapse in sequence models."""
