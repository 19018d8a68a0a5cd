"""Consensus lab: Fast-HotStuff (basic and pipelined) and a HotStuff baseline
under a seeded partially synchronous simulator."""

__version__ = "0.1.0"
