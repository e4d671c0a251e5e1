"""Training losses: Charbonnier reconstruction, dark-channel consistency,
adversarial terms, perceptual feature loss, and their weighted total."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import Conv2d

PROB_EPS = 1e-6  # probability clamp before logs
DC_PATCH = 25


@dataclass
class LossWeights:
    rc: float = 1.0
    adv: float = 0.2
    dc: float = 1e-2
    per: float = 0.2
    hda: float = 0.5

    def __post_init__(self):
        for name in ("rc", "adv", "dc", "per", "hda"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be nonnegative")


def charbonnier(x: Tensor, y: Tensor, eps: float = 1e-3) -> Tensor:
    """Smooth L1: mean of sqrt((x - y)^2 + eps^2). Equals eps at x == y."""
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    d = x - y
    return ad.mean(ad.sqrt(d * d + eps * eps))


def reconstruction_loss(teacher_out_syn, gt_syn, teacher_out_hda=None,
                        pseudo_clean=None, lambda_hda: float = 0.5) -> Tensor:
    """Supervised Charbonnier plus the weighted pseudo-pair term (when present)."""
    loss = charbonnier(teacher_out_syn, gt_syn)
    if teacher_out_hda is not None:
        loss = loss + lambda_hda * charbonnier(teacher_out_hda, pseudo_clean)
    return loss


def dark_channel_tensor(batch: Tensor, patch: int = DC_PATCH) -> Tensor:
    """Differentiable dark channel of an (N, 3, H, W) batch in [0, 1].

    Matches dcp.dark_channel: channel minimum, then a replicate-padded
    window minimum; min gradients route to the lowest-index argmin.
    """
    if batch.shape[1] != 3:
        raise ValueError("dark channel needs 3-channel input")
    if patch < 1 or patch % 2 == 0:
        raise ValueError(f"patch must be odd and >= 1, got {patch}")
    cmin = ad.channel_min(batch)
    if patch == 1:
        return cmin
    return ad.window_min(ad.replicate_pad(cmin, patch // 2), patch)


def dark_channel_loss(batch: Tensor, patch: int = DC_PATCH) -> Tensor:
    """Mean dark-channel intensity (L1 norm over pixels, averaged per image)."""
    return ad.mean(dark_channel_tensor(batch, patch))


def adversarial_loss_generator(d_out: Tensor) -> Tensor:
    """Mean -log D over patch cells; probabilities clamped away from {0, 1}."""
    return ad.mean(-ad.log(ad.clamp(d_out, PROB_EPS, 1.0 - PROB_EPS)))


def bce_loss(d_out: Tensor, target: float) -> Tensor:
    """Binary cross-entropy of patch probabilities against a constant target."""
    p = ad.clamp(d_out, PROB_EPS, 1.0 - PROB_EPS)
    return ad.mean(-(target * ad.log(p) + (1.0 - target) * ad.log(1.0 - p)))


class FeatureExtractor:
    """Frozen 3-stage random-convolution stack used by the perceptual loss.

    Weights are drawn once from the given seed and never trained. A
    pretrained backbone can be swapped in through the same interface:
    ``stages(x)`` returning three feature tensors.
    """

    def __init__(self, seed: int = 2023, channels=(8, 16, 32), activation="relu",
                 bias: bool = False):
        if activation not in ("relu", "none"):
            raise ValueError(f"unknown activation {activation!r}")
        rng = np.random.default_rng(seed)
        self.activation = activation
        cins = (3,) + tuple(channels[:-1])
        self.convs = []
        for cin, cout in zip(cins, channels):
            conv = Conv2d(rng, cin, cout, k=3, stride=2, padding=1, bias=bias)
            conv.weight.requires_grad = False
            if conv.bias is not None:
                conv.bias.requires_grad = False
            self.convs.append(conv)

    def stages(self, x: Tensor):
        feats = []
        h = x
        for conv in self.convs:
            h = conv(h)
            if self.activation == "relu":
                h = ad.relu(h)
            feats.append(h)
        return feats


def feature_loss(out: Tensor, ref: Tensor, extractor: FeatureExtractor) -> Tensor:
    """Sum over 3 stages of the size-normalized squared feature distance."""
    if out.shape != ref.shape:
        raise ValueError(f"shape mismatch {out.shape} vs {ref.shape}")
    total = Tensor(0.0)
    for fo, fr in zip(extractor.stages(out), extractor.stages(ref)):
        n, c, h, w = fo.shape
        d = fr - fo
        total = total + ad.tsum(d * d) * (1.0 / (n * c * h * w))
    return total


def unsupervised_loss(real_dehazed: Tensor, discriminator, weights: LossWeights,
                      dc_patch: int = DC_PATCH) -> Tensor:
    """Online evaluated error on the real domain: adversarial + dark channel."""
    loss = Tensor(0.0)
    if weights.adv > 0:
        loss = loss + weights.adv * adversarial_loss_generator(
            discriminator.forward(real_dehazed)
        )
    if weights.dc > 0:
        loss = loss + weights.dc * dark_channel_loss(real_dehazed, dc_patch)
    return loss


def total_loss(rc: Tensor, adv: Tensor, dc: Tensor, per: Tensor,
               weights: LossWeights) -> Tensor:
    return weights.rc * rc + weights.adv * adv + weights.dc * dc + weights.per * per
