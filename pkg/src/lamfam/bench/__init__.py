"""Benchmark harness: experiment configs, runs, tables and oracle validation."""
