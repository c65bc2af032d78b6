"""Simulator for key distribution with sequences of nonorthogonal photon states."""

__version__ = "0.1.0"
