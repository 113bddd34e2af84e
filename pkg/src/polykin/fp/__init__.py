"""Deterministic Fokker-Planck solvers."""
