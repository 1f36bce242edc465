"""Benchmark suite and simulator for flooding-attack effects on cyclic real-time tasks."""

__version__ = "0.1.0"
