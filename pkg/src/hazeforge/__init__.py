"""hazeforge: teacher-student image dehazing with haze density augmentation.

Submodules:
  imaging   image container, filtering, augmentation, file I/O
  scatter   atmospheric scattering model and density re-adjustment
  dcp       dark channel prior toolchain (classical oracle path)
  autodiff  reverse-mode differentiation engine over numpy
  nn        layers and the dehazer / transmission / discriminator nets
  optim     Adam, cyclic learning rate, EMA shadow
  losses    Charbonnier, dark channel, adversarial, perceptual, total
  metrics   PSNR and SSIM
  mutual    training orchestrator and the sample-cycle buffer
  datasets  dataset layout contract and toy generator
  cli       command-line entry points
"""

from .imaging import Image, load_image, min_filter, save_image
from .metrics import psnr, ssim
from .scatter import hda_adjust, hda_rebuild, synthesize_haze

__all__ = [
    "Image",
    "load_image",
    "save_image",
    "min_filter",
    "synthesize_haze",
    "hda_adjust",
    "hda_rebuild",
    "psnr",
    "ssim",
]

__version__ = "0.1.0"
