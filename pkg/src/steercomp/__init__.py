"""Data-driven feedforward compensation of a delayed steering loop."""

__version__ = "0.1.0"
