"""Kernel-optimized readouts for quantum reservoir computers and extreme learning machines."""

__version__ = "0.1.0"
