"""Subgradient-trajectory tools for probing spurious local minima at infinity."""
__version__ = "0.1.0"
