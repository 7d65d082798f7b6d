"""Entanglement routing and simulation for space-ground integrated quantum networks."""

from __future__ import annotations

__version__ = "0.1.0"
