"""Capability servers that put real checkpoints behind the visloop wire
protocol, one process per capability."""

__version__ = "0.1.0"
