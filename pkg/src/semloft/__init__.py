"""Semantic world extraction from occupancy grid maps."""

__version__ = "0.1.0"
