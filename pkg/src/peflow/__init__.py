"""Worst-case persistently excited signals for degenerate gradient flows.

Tools to construct, simulate, and certify excitation signals S(t) for the
flow xdot = -S(t) x under windowed energy bounds a*I <= int S <= b*I:
optimal planar rank-one controls, a brute-force optimality oracle,
decay-rate and L2-gain consequences, and generalized (non-uniform)
persistency-of-excitation schedules.
"""
from __future__ import annotations

__version__ = "0.1.0"

__all__ = ["signals", "flow", "extremal2d", "oracle", "gain", "gpe", "cli"]
