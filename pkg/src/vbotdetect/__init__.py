"""Botnet detection for connected vehicles: traffic synthesis, flow metering,
from-scratch classifiers and a two-level detection/response pipeline."""

__version__ = "0.1.0"
