"""Warp-factor effective potential toolkit on discretized compact manifolds."""

__version__ = "0.1.0"
