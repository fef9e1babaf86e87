"""Lowest-order mixed finite elements with all-at-once multigrid."""
__version__ = "0.1.0"
