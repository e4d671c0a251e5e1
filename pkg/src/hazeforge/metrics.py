"""Full-reference quality metrics: PSNR and SSIM.

PSNR is computed in the [0, 1] float domain (peak 1), which can differ
from 8-bit toolchains by quantization effects. SSIM uses the canonical
11x11 Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03, L = 1, on the
luma channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate

from .imaging import Image

PSNR_INF = math.inf  # sentinel for identical images

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(a: Image, b: Image) -> float:
    """10 log10(1 / MSE) in dB; inf for identical images."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch {a.data.shape} vs {b.data.shape}")
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return PSNR_INF
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a: Image, b: Image) -> float:
    """Mean local SSIM over the valid window positions of the luma channel."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch {a.data.shape} vs {b.data.shape}")
    x = a.to_gray().data[0]
    y = b.to_gray().data[0]
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    w = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2

    def filt(img):
        return correlate(img, w, mode="constant")

    half = SSIM_WINDOW // 2
    sl = slice(half, -half)
    mx = filt(x)[sl, sl]
    my = filt(y)[sl, sl]
    sxx = filt(x * x)[sl, sl] - mx * mx
    syy = filt(y * y)[sl, sl] - my * my
    sxy = filt(x * y)[sl, sl] - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


@dataclass
class MetricReport:
    names: list = field(default_factory=list)
    psnr_values: list = field(default_factory=list)
    ssim_values: list = field(default_factory=list)

    def add(self, name: str, psnr_db: float, ssim_value: float):
        self.names.append(name)
        self.psnr_values.append(psnr_db)
        self.ssim_values.append(ssim_value)

    @property
    def mean_psnr(self) -> float:
        return sum(self.psnr_values) / len(self.psnr_values)

    @property
    def mean_ssim(self) -> float:
        return sum(self.ssim_values) / len(self.ssim_values)

    def lines(self):
        for name, p, s in zip(self.names, self.psnr_values, self.ssim_values):
            yield f"name={name}\tpsnr={p:.6g}\tssim={s:.6g}"
        yield f"name=__mean__\tpsnr={self.mean_psnr:.6g}\tssim={self.mean_ssim:.6g}"


def compare(a: Image, b: Image):
    return psnr(a, b), ssim(a, b)
