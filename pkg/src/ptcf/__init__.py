"""Cluster expansions for partially truncated correlation functions."""

__version__ = "0.1.0"
