"""Oracles, metrics, experiments and scenario files."""
