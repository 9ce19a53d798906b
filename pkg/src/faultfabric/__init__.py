"""Fault injection as a service for virtual networks, on a deterministic
simulated data-center fabric."""

__version__ = "0.1.0"
