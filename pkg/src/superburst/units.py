"""Time-unit conversions.

All dynamics run in units of 1/Gamma; nanoseconds appear only at I/O
boundaries (pulse shapes, time tags, CSV output).
"""
from __future__ import annotations

import math

import numpy as np

#: Rb D2 natural linewidth, angular frequency (rad/s).
DEFAULT_GAMMA_RAD_S = 2 * math.pi * 6e6


def ns_per_lifetime(gamma_rad_s: float = DEFAULT_GAMMA_RAD_S) -> float:
    """Length of one 1/Gamma in ns (about 26.5 ns for the default)."""
    if gamma_rad_s <= 0:
        raise ValueError(f"gamma_rad_s must be positive, got {gamma_rad_s}")
    return 1e9 / gamma_rad_s


def to_ns(t, gamma_rad_s: float = DEFAULT_GAMMA_RAD_S):
    return np.asarray(t, dtype=float) * ns_per_lifetime(gamma_rad_s)


def from_ns(t_ns, gamma_rad_s: float = DEFAULT_GAMMA_RAD_S):
    return np.asarray(t_ns, dtype=float) / ns_per_lifetime(gamma_rad_s)
