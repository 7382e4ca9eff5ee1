"""Casimir forces between lossy and magneto-dielectric planar mirrors."""

__version__ = "0.1.0"
