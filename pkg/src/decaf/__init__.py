"""Density-field atomistic fingerprints in canonical frames, with GP regression."""

from decaf.errors import DecafError

__version__ = "0.1.0"

__all__ = ["DecafError", "__version__"]
