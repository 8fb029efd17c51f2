"""Benchmark data generators, forecasting loop, classification data and metrics."""
