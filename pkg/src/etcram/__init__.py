"""Behavioral simulator for electro-thermo-chemical analog memory and the
in-memory-computing arrays built from it."""

__version__ = "0.1.0"
