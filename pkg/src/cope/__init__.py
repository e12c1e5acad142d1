"""Conditional polynomial expansion generators and their tensor oracles."""

__version__ = "0.1.0"
