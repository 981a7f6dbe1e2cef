"""Turbulence statistics: scintillation index and structure constant.

The scintillation index is the normalized intensity variance of on-level
samples; the refractive-index structure constant follows from it through
the spherical-wave weak-turbulence propagation relation
``sigma_I^2 = 0.5 * Cn2 * k^(7/6) * L^(11/6)`` with k the optical wave
number and L the path length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["AtmosStats", "scintillation_index", "cn2_from_rytov", "compute_atmos"]


@dataclass(frozen=True)
class AtmosStats:
    """Turbulence figures for one link and observation window."""

    sigma_i2: float
    cn2: float
    wavelength_m: float
    path_length_m: float


def scintillation_index(intensities) -> float:
    """Normalized intensity variance E[I^2]/E[I]^2 - 1.

    Callers pass on-level samples only (e.g. the DC-removed voltages of
    symbols that carried a 1).  Scale-invariant; raises on an empty or
    zero-mean input.
    """
    arr = np.asarray(intensities, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("need at least one intensity sample")
    mean = arr.mean()
    if not mean > 0:
        raise ValueError(f"mean intensity must be > 0, got {mean!r}")
    return float(np.mean(arr**2) / mean**2 - 1.0)


def cn2_from_rytov(sigma_i2: float, wavelength_m: float, path_length_m: float) -> float:
    """Structure constant (m^(-2/3)) from the scintillation index.

    Inverts the spherical-wave weak-turbulence relation; linear in
    ``sigma_i2``, so a zero index maps to zero turbulence.
    """
    if sigma_i2 < 0:
        raise ValueError(f"sigma_i2 must be >= 0, got {sigma_i2!r}")
    if not wavelength_m > 0 or not path_length_m > 0:
        raise ValueError("wavelength and path length must be > 0")
    k = 2.0 * math.pi / wavelength_m
    return sigma_i2 / (0.5 * k ** (7.0 / 6.0) * path_length_m ** (11.0 / 6.0))


def compute_atmos(intensities, wavelength_m: float, path_length_m: float) -> AtmosStats:
    """Scintillation index plus the derived structure constant."""
    s = scintillation_index(intensities)
    return AtmosStats(
        sigma_i2=s,
        cn2=cn2_from_rytov(s, wavelength_m, path_length_m),
        wavelength_m=wavelength_m,
        path_length_m=path_length_m,
    )
