"""Deterministic multi-agent behavioral simulations and the experiment harness around them."""

from __future__ import annotations

__version__ = "0.1.0"
