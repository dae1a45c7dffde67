"""Tabular actor-critic and multi-critic actor-critic for gridworld autonomy transfer."""

__version__ = "0.1.0"
