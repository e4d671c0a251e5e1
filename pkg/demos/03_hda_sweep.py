"""Haze density augmentation: one dehazed scene, five haze levels.

HDA raises the transmission map to a power p and re-renders the scene:
p < 1 thins the haze, p > 1 thickens it. The sweep mirrors how the
sample cycle rebuilds pseudo training pairs at randomized densities.
"""

import os

import numpy as np

from hazeforge.datasets import _toy_clean_scene, _toy_transmission
from hazeforge.imaging import Image, save_image
from hazeforge.scatter import hda_adjust, hda_rebuild, synthesize_haze

out_dir = os.path.join(os.path.dirname(__file__), "output", "hda")
os.makedirs(out_dir, exist_ok=True)

rng = np.random.default_rng(3)
scene = Image(_toy_clean_scene(rng, 96))
t = Image(_toy_transmission(rng, 96, 0.25, 0.7, grid=4))
airlight = np.array([0.88, 0.9, 0.93])

print("p      mean t'   mean |x' - scene|")
for p in (0.5, 0.8, 1.0, 1.2, 1.4):
    t_adj = hda_adjust(t, p)
    rebuilt = hda_rebuild(scene, t, airlight, p)
    save_image(rebuilt, os.path.join(out_dir, f"rebuilt_p{p}.png"))
    dist = np.abs(rebuilt.data - scene.data).mean()
    print(f"{p:.1f}    {t_adj.data.mean():.3f}     {dist:.4f}")

# p = 1.0 reproduces plain synthesis with the unmodified map
plain = synthesize_haze(scene, t, airlight)
identity = hda_rebuild(scene, t, airlight, 1.0)
print(f"p=1 identity check: max diff {np.abs(plain.data - identity.data).max():.2e}")
print(f"images written to {out_dir}")
