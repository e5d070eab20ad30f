"""Error-mitigation cost models, shot estimators and verifiable benchmarks for noisy Clifford circuits."""

__version__ = "0.1.0"
