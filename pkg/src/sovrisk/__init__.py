"""Equilibrium model of sovereign default: calibration, projection and scenarios."""

__version__ = "0.1.0"
