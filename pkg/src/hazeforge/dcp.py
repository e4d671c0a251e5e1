"""Dark channel prior toolchain.

Dark channel, airlight and transmission estimation, and the classical
non-learned dehazer. All operations are deterministic: ties in the
airlight selection break toward the lowest row-major index.
"""

from __future__ import annotations

import numpy as np

from .imaging import Image, clamp01, min_filter
from .scatter import T_MAX, as_airlight

DEFAULT_PATCH = 25
DEFAULT_OMEGA = 0.95
DEFAULT_TOP_FRACTION = 0.001
DEFAULT_T_FLOOR = 0.1


class DcpError(ValueError):
    pass


def dark_channel(img: Image, patch: int = DEFAULT_PATCH) -> Image:
    """Per-pixel channel minimum followed by a patch-sized window minimum."""
    if img.channels != 3:
        raise DcpError("dark channel needs a 3-channel image")
    channel_min = Image(img.data.min(axis=0)[None])
    return min_filter(channel_min, patch)


def estimate_airlight(
    img: Image,
    patch: int = DEFAULT_PATCH,
    top_fraction: float = DEFAULT_TOP_FRACTION,
) -> np.ndarray:
    """Airlight from the brightest pixel among the top dark-channel pixels."""
    if not 0.0 < top_fraction <= 1.0:
        raise DcpError(f"top_fraction must be in (0, 1], got {top_fraction}")
    dc = dark_channel(img, patch).data.ravel()
    n = dc.size
    k = max(1, int(n * top_fraction))
    # stable selection: sort by (-value, index) so ties pick the lowest index
    order = np.lexsort((np.arange(n), -dc))
    candidates = order[:k]
    intensity = img.data.reshape(3, -1).sum(axis=0)
    best = candidates[np.lexsort((candidates, -intensity[candidates]))[0]]
    return img.data.reshape(3, -1)[:, best].copy()


def estimate_transmission(
    img: Image,
    a,
    patch: int = DEFAULT_PATCH,
    omega: float = DEFAULT_OMEGA,
) -> Image:
    """t = 1 - omega * dark_channel(I / A), clamped into [0, T_MAX]."""
    a = as_airlight(a)
    if np.any(a <= 0):
        raise DcpError("airlight channels must be positive")
    if not 0.0 < omega <= 1.0:
        raise DcpError(f"omega must be in (0, 1], got {omega}")
    normalized = clamp01(img.data / a.reshape(-1, 1, 1))
    dc = dark_channel(Image(normalized), patch)
    return Image(np.clip(1.0 - omega * dc.data, 0.0, T_MAX))


def dcp_dehaze(
    img: Image,
    patch: int = DEFAULT_PATCH,
    omega: float = DEFAULT_OMEGA,
    t_floor: float = DEFAULT_T_FLOOR,
) -> Image:
    """Classical recovery J = (I - A) / max(t, t_floor) + A, clamped."""
    a = estimate_airlight(img, patch)
    t = estimate_transmission(img, a, patch, omega)
    tm = np.maximum(t.data, t_floor)
    out = (img.data - a.reshape(-1, 1, 1)) / tm + a.reshape(-1, 1, 1)
    return Image(clamp01(out))
