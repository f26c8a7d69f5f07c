"""Synthetic turbulence, inertial particle clouds, mean-field limits and
two-way coupled Burgers experiments."""

__version__ = "0.1.0"
