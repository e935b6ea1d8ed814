"""Adhesive rough-contact finite element solver with embedded AFM data."""

__version__ = "1.0.0"
