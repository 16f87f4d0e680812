"""Numerical verification toolkit for the symmetric-square times newform L-function."""

from __future__ import annotations

__version__ = "0.1.0"
