"""Closed-loop low-thrust orbit transfer guidance with classical and Lyapunov-stable modified Q-laws."""

__version__ = "0.1.0"
