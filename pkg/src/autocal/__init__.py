"""Automatic calibration of a distributed-computing simulator against traces."""

__version__ = "0.1.0"
