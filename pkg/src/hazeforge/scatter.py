"""Atmospheric scattering model: haze synthesis and density re-adjustment.

The forward model is I(x) = J(x) t(x) + A (1 - t(x)) with a global
per-channel airlight A and a single-channel transmission map t. Haze
density augmentation raises t to a random power p before re-synthesis.
"""

from __future__ import annotations

import numpy as np

from .imaging import Image, clamp01

T_MAX = 0.99  # transmission upper clamp

DEFAULT_P_RANGE = (0.5, 1.4)


class ScatterError(ValueError):
    pass


def as_airlight(a) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(a, dtype=np.float64))
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ScatterError(f"airlight components must lie in [0, 1], got {arr}")
    return arr


def clamp_transmission(t: Image) -> Image:
    """Force a transmission map into its valid range [0, T_MAX]."""
    return Image(np.clip(t.data, 0.0, T_MAX))


def synthesize_haze(clean: Image, t: Image, a) -> Image:
    """Forward haze model; output clamped to [0, 1]."""
    if t.channels != 1:
        raise ScatterError("transmission map must be single-channel")
    if (t.height, t.width) != (clean.height, clean.width):
        raise ScatterError(
            f"size mismatch: clean {clean.height}x{clean.width} vs t {t.height}x{t.width}"
        )
    a = as_airlight(a)
    tm = t.data  # (1, H, W), broadcasts across channels
    out = clean.data * tm + a.reshape(-1, 1, 1) * (1.0 - tm)
    return Image(clamp01(out))


def hda_adjust(t: Image, p: float) -> Image:
    """Raise transmission to the power p, clamped into [0, T_MAX]."""
    if p <= 0:
        raise ScatterError(f"density factor must be positive, got {p}")
    return Image(np.clip(t.data**p, 0.0, T_MAX))


def hda_rebuild(dehazed: Image, t: Image, a, p: float) -> Image:
    """Re-synthesize a hazy image from a dehazed estimate at density p."""
    return synthesize_haze(dehazed, hda_adjust(t, p), a)


def sample_density(rng: np.random.Generator, p_range=DEFAULT_P_RANGE) -> float:
    lo, hi = p_range
    if lo <= 0 or hi < lo:
        raise ScatterError(f"invalid density range {p_range}")
    return float(rng.uniform(lo, hi))


def invert_haze(hazy: Image, t: Image, a, t_floor: float = 0.05) -> Image:
    """Algebraic inversion J = (I - A(1-t)) / t of the forward model.

    Oracle-side helper: t is floored at t_floor to guard the division;
    exact (to rounding) when the forward synthesis did not clamp.
    """
    a = as_airlight(a)
    tm = np.maximum(t.data, t_floor)
    out = (hazy.data - a.reshape(-1, 1, 1) * (1.0 - tm)) / tm
    return Image(clamp01(out))
