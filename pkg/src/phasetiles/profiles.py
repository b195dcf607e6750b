"""Smooth profile functions shared across symbol constructions.

All bumps are built from the classical C-infinity transition
e(t) = exp(-1/t), so supports are exact (identically zero outside the
stated interval) and every derivative vanishes at the support edges.
"""

from __future__ import annotations

import numpy as np


def _e(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C-infinity monotone step: 0 for t <= 0, 1 for t >= 1."""
    a = _e(t)
    b = _e(1.0 - np.asarray(t, dtype=float))
    return a / (a + b)


def plateau(u, flat=0.5, supp=1.0):
    """Even C-infinity bump: 1 on |u| <= flat, 0 on |u| >= supp."""
    if not flat < supp:
        raise ValueError("flat must be < supp")
    u = np.abs(np.asarray(u, dtype=float))
    return smooth_step((supp - u) / (supp - flat))


def bump(u):
    """Standard C-infinity bump supported on |u| <= 1 with bump(0) = 1."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui * ui))
    return out
