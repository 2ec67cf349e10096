"""Counterdiabatic driving with approximate adiabatic gauge potentials."""

__version__ = "0.1.0"
