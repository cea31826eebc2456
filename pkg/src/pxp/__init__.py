"""Sessions between predicting-and-explaining agents: engine, analysers, gateway."""
from __future__ import annotations

__version__ = "0.1.0"
