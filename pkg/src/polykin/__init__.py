"""Inertial kinetic models of dumbbell and rigid-rod polymers."""

__version__ = "0.1.0"
