"""Instantiation-based satisfiability checking for hierarchic theory combinations."""

__version__ = "0.1.0"
