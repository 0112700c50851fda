"""Test suite for Rank Collapse Lab."""
