"""Experiment harness: phantoms, runs, sweeps and result files."""
