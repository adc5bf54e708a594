"""Finite-resolution models of Bowditch boundaries for splittings of free groups
over cyclic subgroups."""

__version__ = "0.1.0"
