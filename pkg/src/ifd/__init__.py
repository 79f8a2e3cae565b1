"""Inverse flight dynamics on SO(3) for fixed-wing and tethered aircraft."""

__version__ = "0.1.0"
