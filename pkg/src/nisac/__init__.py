"""Downlink neural ISAC simulation: scenes, channels, estimation, features, CNN."""

__version__ = "0.1.0"
