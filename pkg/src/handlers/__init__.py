"""Drivers on top of the core: seeded models, sweeps, reports and property suites."""
