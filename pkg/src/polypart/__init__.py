"""Numerical polynomial partitioning for families of varieties."""

__version__ = "0.1.0"
