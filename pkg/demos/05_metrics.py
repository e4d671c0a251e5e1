"""PSNR and SSIM behavior under controlled distortions.

Shows how the two metrics respond differently: PSNR only sees pixel
error magnitude, SSIM tracks local structure, so a constant brightness
shift hurts PSNR far more than SSIM.
"""

import numpy as np

from hazeforge.datasets import _toy_clean_scene
from hazeforge.imaging import Image
from hazeforge.metrics import psnr, ssim

rng = np.random.default_rng(12)
ref = Image(_toy_clean_scene(rng, 96))

print(f"{'distortion':<28}{'psnr (dB)':>10}{'ssim':>8}")

for amp in (0.01, 0.05, 0.15):
    noisy = Image(np.clip(ref.data + rng.normal(0, amp, ref.data.shape), 0, 1))
    print(f"gaussian noise sigma={amp:<8}{psnr(ref, noisy):10.2f}{ssim(ref, noisy):8.3f}")

for shift in (0.05, 0.15):
    shifted = Image(np.clip(ref.data + shift, 0, 1))
    print(f"brightness shift +{shift:<9}{psnr(ref, shifted):10.2f}{ssim(ref, shifted):8.3f}")

# structure destroyed at equal energy: shuffle pixels of the same image
flat = ref.data.reshape(3, -1).copy()
perm = rng.permutation(flat.shape[1])
shuffled = Image(flat[:, perm].reshape(ref.data.shape))
print(f"{'pixel shuffle':<28}{psnr(ref, shuffled):10.2f}{ssim(ref, shuffled):8.3f}")

print(f"{'identity':<28}{psnr(ref, ref):>10}{ssim(ref, ref):8.3f}")
