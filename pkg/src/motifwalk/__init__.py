"""Motif-graph grammar toolkit: molecules as random walks over learned motif graphs."""

__version__ = "0.1.0"
