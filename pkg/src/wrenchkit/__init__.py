"""Multirotor modeling, control allocation, and wrench-set estimation."""

__version__ = "0.1.0"
