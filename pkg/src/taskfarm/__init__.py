"""Fault-tolerant farmer-worker dispatching with a deterministic simulator."""

__version__ = "0.1.0"
