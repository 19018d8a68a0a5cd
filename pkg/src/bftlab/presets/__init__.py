"""Bundled scenario files (data only)."""
