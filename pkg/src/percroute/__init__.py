"""Percolation-based multipath routing for random extended wireless networks."""

__version__ = "0.1.0"
