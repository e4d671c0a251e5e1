"""Dark channel prior, step by step.

Builds a hazy scene, then runs each stage of the classical pipeline:
dark channel -> airlight estimate -> transmission map -> recovery.
"""

import os

import numpy as np

from hazeforge.datasets import _toy_clean_scene, _toy_transmission
from hazeforge.dcp import (dark_channel, dcp_dehaze, estimate_airlight,
                           estimate_transmission)
from hazeforge.imaging import Image, save_image
from hazeforge.metrics import psnr, ssim
from hazeforge.scatter import synthesize_haze

out_dir = os.path.join(os.path.dirname(__file__), "output", "dcp")
os.makedirs(out_dir, exist_ok=True)

rng = np.random.default_rng(7)
clean = Image(_toy_clean_scene(rng, 96))
t_true = Image(_toy_transmission(rng, 96, 0.3, 0.8, grid=4))
a_true = np.array([0.9, 0.9, 0.9])
hazy = synthesize_haze(clean, t_true, a_true)
save_image(hazy, os.path.join(out_dir, "hazy.png"))

# the prior: dark channels of haze-free scenes are mostly near zero,
# while haze lifts them toward the airlight
dc_clean = dark_channel(clean, 15)
dc_hazy = dark_channel(hazy, 15)
print(f"dark channel mean: clean={dc_clean.data.mean():.3f}  hazy={dc_hazy.data.mean():.3f}")
save_image(dc_hazy, os.path.join(out_dir, "dark_channel.png"))

a_est = estimate_airlight(hazy, 15)
print(f"airlight: true={a_true}  estimated={np.round(a_est, 3)}")

t_est = estimate_transmission(hazy, a_est, 15)
t_err = np.abs(t_est.data - t_true.data).mean()
save_image(t_est, os.path.join(out_dir, "transmission_est.png"))
print(f"transmission mean abs error: {t_err:.3f}")

recovered = dcp_dehaze(hazy, 15)
save_image(recovered, os.path.join(out_dir, "dehazed.png"))
print(f"hazy vs clean:    psnr={psnr(hazy, clean):6.2f} dB  ssim={ssim(hazy, clean):.3f}")
print(f"dehazed vs clean: psnr={psnr(recovered, clean):6.2f} dB  ssim={ssim(recovered, clean):.3f}")
print(f"images written to {out_dir}")
