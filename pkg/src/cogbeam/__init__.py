"""Minimum-power cognitive-radio MIMO transmit beamforming."""

__version__ = "0.1.0"
