"""Disjoint independent transversals in multipartite graphs."""

__version__ = "0.1.0"
