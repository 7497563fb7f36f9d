"""Mixed H2/H-infinity impedance control toolkit for series elastic actuators."""

from __future__ import annotations

__version__ = "0.1.0"
