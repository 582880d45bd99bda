"""Pulse-level simulation and calibration of microwave-activated sqrt(iSWAP) gates
between fixed-frequency transmons sharing a driven transmon coupler."""

__version__ = "0.1.0"
