"""Desk-scale certificates for isoperimetry in balls and L^p compression."""

__version__ = "0.1.0"
