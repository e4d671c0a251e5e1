"""Dataset layout contract and the procedural toy-dataset generator.

Layout: ``root/hazy``, ``root/clean`` paired by filename, optional
``root/trans`` (grayscale ground-truth transmission) and ``root/real``
(unpaired real hazy images). The generator additionally writes
``root/real_gt`` references (it knows the latent clean scene) and
``root/airlight.txt`` / ``root/real_airlight.txt`` with the exact
per-image airlight used -- both optional extensions real datasets can
omit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter, zoom

from .imaging import Image, clamp01, load_image, save_image
from .scatter import synthesize_haze


class DatasetError(ValueError):
    pass


@dataclass
class DatasetLayout:
    root: str
    pair_names: list = field(default_factory=list)
    real_names: list = field(default_factory=list)
    has_trans: bool = False
    has_real_gt: bool = False

    @classmethod
    def open(cls, root) -> "DatasetLayout":
        root = str(root)
        for sub in ("hazy", "clean"):
            if not os.path.isdir(os.path.join(root, sub)):
                raise DatasetError(f"missing dataset directory: {os.path.join(root, sub)}")
        clean_names = sorted(os.listdir(os.path.join(root, "clean")))
        hazy_names = set(os.listdir(os.path.join(root, "hazy")))
        missing = [n for n in clean_names if n not in hazy_names]
        if missing:
            raise DatasetError(f"clean images without hazy counterpart: {missing[:5]}")
        layout = cls(root=root, pair_names=clean_names)
        layout.has_trans = os.path.isdir(os.path.join(root, "trans"))
        real_dir = os.path.join(root, "real")
        layout.real_names = sorted(os.listdir(real_dir)) if os.path.isdir(real_dir) else []
        layout.has_real_gt = os.path.isdir(os.path.join(root, "real_gt"))
        return layout

    def load_pair(self, name):
        hazy = load_image(os.path.join(self.root, "hazy", name))
        clean = load_image(os.path.join(self.root, "clean", name))
        if hazy.data.shape != clean.data.shape:
            raise DatasetError(f"size mismatch within pair {name}")
        trans = None
        if self.has_trans:
            tpath = os.path.join(self.root, "trans", name)
            if os.path.exists(tpath):
                trans = load_image(tpath)
        return hazy, clean, trans

    def load_real(self, name):
        return load_image(os.path.join(self.root, "real", name))

    def load_real_gt(self, name):
        path = os.path.join(self.root, "real_gt", name)
        return load_image(path) if os.path.exists(path) else None

    def airlights(self, fname="airlight.txt"):
        path = os.path.join(self.root, fname)
        if not os.path.exists(path):
            return {}
        out = {}
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                parts = line.split()
                if len(parts) == 4:
                    out[parts[0]] = np.array([float(v) for v in parts[1:]])
        return out


def _quantize_grid(arr):
    # snap to the 8-bit grid so saved files carry the exact values
    return np.floor(clamp01(arr) * 255.0 + 0.5) / 255.0


def _toy_clean_scene(rng, size):
    """Procedural scene: gradient background, colored blobs, and enough
    near-black objects that the dark channel prior holds by construction."""
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    theta = rng.uniform(0, 2 * np.pi)
    ramp = (np.cos(theta) * xx + np.sin(theta) * yy + 1.0) / 2.0
    c0 = rng.uniform(0.3, 0.9, 3)
    c1 = rng.uniform(0.3, 0.9, 3)
    img = c0[:, None, None] + (c1 - c0)[:, None, None] * ramp[None]
    for _ in range(rng.integers(3, 6)):
        w = int(rng.integers(size // 8, size // 3))
        h = int(rng.integers(size // 8, size // 3))
        y = int(rng.integers(0, size - h + 1))
        x = int(rng.integers(0, size - w + 1))
        img[:, y : y + h, x : x + w] = rng.uniform(0.15, 1.0, 3)[:, None, None]
    # guaranteed dark objects, spread over a coarse grid
    cells = [(cy, cx) for cy in range(2) for cx in range(2)]
    rng.shuffle(cells)
    for cy, cx in cells[:4]:
        s = int(rng.integers(max(4, size // 6), max(5, size // 4)))
        y0 = cy * size // 2 + int(rng.integers(0, max(1, size // 2 - s)))
        x0 = cx * size // 2 + int(rng.integers(0, max(1, size // 2 - s)))
        img[:, y0 : y0 + s, x0 : x0 + s] = rng.uniform(0.0, 0.04, 3)[:, None, None]
    img += rng.normal(0, 0.01, img.shape)
    return _quantize_grid(img)


def _toy_transmission(rng, size, lo, hi, grid):
    coarse = rng.uniform(lo, hi, (grid, grid))
    t = zoom(coarse, size / grid, order=1)[:size, :size]
    t = gaussian_filter(t, sigma=size / 16.0, mode="nearest")
    return _quantize_grid(np.clip(t, lo, hi))[None]


def generate_toy(out_dir, n_images=16, size=64, seed=0):
    """Write a deterministic desk-scale dataset under out_dir."""
    out_dir = str(out_dir)
    for sub in ("hazy", "clean", "trans", "real", "real_gt"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    air_lines = []
    real_air_lines = []
    for i in range(n_images):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        name = f"img_{i:04d}.png"

        clean = _toy_clean_scene(rng, size)
        t = _toy_transmission(rng, size, 0.2, 0.95, grid=4)
        base = rng.uniform(0.7, 0.97)
        a = np.clip(base + rng.uniform(-0.03, 0.03, 3), 0.7, 1.0)
        hazy = synthesize_haze(Image(clean), Image(t), a)
        save_image(Image(clean), os.path.join(out_dir, "clean", name))
        save_image(Image(t), os.path.join(out_dir, "trans", name))
        save_image(hazy, os.path.join(out_dir, "hazy", name))
        air_lines.append(f"{name} {float(a[0])!r} {float(a[1])!r} {float(a[2])!r}")

        # "real" domain: heavier, more spatially varying haze statistics
        real_clean = _toy_clean_scene(rng, size)
        t_real = _toy_transmission(rng, size, 0.1, 0.65, grid=6)
        base = rng.uniform(0.78, 1.0)
        a_real = np.clip(base + rng.uniform(-0.02, 0.02, 3), 0.7, 1.0)
        real_hazy = synthesize_haze(Image(real_clean), Image(t_real), a_real)
        save_image(real_hazy, os.path.join(out_dir, "real", name))
        save_image(Image(real_clean), os.path.join(out_dir, "real_gt", name))
        real_air_lines.append(
            f"{name} {float(a_real[0])!r} {float(a_real[1])!r} {float(a_real[2])!r}"
        )

    with open(os.path.join(out_dir, "airlight.txt"), "w", encoding="utf-8") as f:
        f.write("\n".join(air_lines) + "\n")
    with open(os.path.join(out_dir, "real_airlight.txt"), "w", encoding="utf-8") as f:
        f.write("\n".join(real_air_lines) + "\n")
    return DatasetLayout.open(out_dir)
