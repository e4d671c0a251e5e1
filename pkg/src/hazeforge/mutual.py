"""Teacher/student mutual-learning trainer with the haze-density sample cycle.

One training step runs, in order: teacher forward on the synthetic batch
(with pseudo-pair slots once the sample cycle is active), the unsupervised
real-domain evaluation, one Adam step on the teacher under the cyclic
schedule, the discriminator update, the EMA student update, and one
supervised T-Net step. The student is never trained by gradients; it is
exactly the EMA shadow of the teacher.

The gradient path of the real-domain feedback is configurable:
``teacher_forward`` (default) computes the unsupervised losses on the
teacher's own forward pass over the real batch -- the EMA student tracks
that teacher, which realizes the mutual signal with a well-defined
gradient. ``student_frozen`` instead scores the frozen student and uses
the score to weight an imitation term; it exists for ablation only.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import dcp
from .autodiff import Tensor
from .checkpoint import encode_seed, load_tensors, save_tensors
from .config import TrainConfig, save_config
from .imaging import Image, augment
from .losses import (FeatureExtractor, LossWeights, adversarial_loss_generator,
                     bce_loss, charbonnier, dark_channel_loss, feature_loss)
from .metrics import psnr, ssim
from .nn import DehazeNet, PatchDiscriminator, TNet, infer_image
from .optim import Adam, CyclicLrSchedule, EmaState
from .scatter import hda_rebuild


class TrainingAbort(RuntimeError):
    """Raised on non-finite losses; carries the step metrics for diagnosis."""

    def __init__(self, message, metrics):
        super().__init__(f"{message}; step metrics: {metrics}")
        self.metrics = metrics


@dataclass
class PseudoPair:
    hazy: Image    # rebuilt hazy input
    clean: Image   # student-dehazed pseudo ground truth
    p: float
    source: str


class SampleCycleBuffer:
    """Bounded FIFO of pseudo pairs; uniform sampling with the run's RNG."""

    def __init__(self, capacity=512):
        self.pairs = deque(maxlen=capacity)

    def push(self, pair: PseudoPair):
        self.pairs.append(pair)

    def sample(self, rng) -> PseudoPair:
        return self.pairs[int(rng.integers(len(self.pairs)))]

    def __len__(self):
        return len(self.pairs)


class TrainState:
    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        ss = np.random.SeedSequence(cfg.seed)
        r_teacher, r_tnet, r_disc, r_train = (
            np.random.default_rng(c) for c in ss.spawn(4)
        )
        self.teacher = DehazeNet(r_teacher, cfg.width, cfg.groups, cfg.blocks_per_group)
        self.tnet = TNet(r_tnet, cfg.tnet_width)
        self.disc = PatchDiscriminator(r_disc, cfg.disc_width)
        self.student = DehazeNet(
            np.random.default_rng(0), cfg.width, cfg.groups, cfg.blocks_per_group
        )
        for p in self.student.parameters():
            p.requires_grad = False
        self.ema = EmaState(self.teacher.parameters(), cfg.ema_decay)
        self.ema.copy_into(self.student)
        self.opt_g = Adam(self.teacher.parameters(), lr=cfg.base_lr)
        self.opt_d = Adam(self.disc.parameters(), lr=cfg.base_lr)
        self.opt_t = Adam(self.tnet.parameters(), lr=cfg.base_lr)
        self.sched = CyclicLrSchedule(cfg.base_lr, cfg.max_lr, cfg.lr_half_period,
                                      cfg.base_momentum, cfg.max_momentum)
        self.extractor = FeatureExtractor(cfg.feature_seed)
        self.buffer = SampleCycleBuffer(cfg.buffer_capacity)
        self.rng = r_train
        self.step = 0
        self.epoch = 0

    @property
    def weights(self) -> LossWeights:
        c = self.cfg
        return LossWeights(c.lambda_rc, c.lambda_adv, c.lambda_dc, c.lambda_per, c.lambda_hda)

    def refresh_student(self):
        self.ema.copy_into(self.student)

    def hda_active(self) -> bool:
        return self.cfg.hda_enabled and self.epoch >= self.cfg.hda_start_epoch


def _finite(value):
    return np.isfinite(value)


def train_step(state: TrainState, batch_syn: dict, batch_real: np.ndarray) -> dict:
    """One optimization step; returns every loss component as a float."""
    cfg = state.cfg
    w = state.weights
    if batch_syn["hazy"].shape[0] == 0 or batch_real.shape[0] == 0:
        raise ValueError("empty batch")
    lr, _ = state.sched.at(state.step)
    eps = cfg.charbonnier_eps
    n_pseudo = int(batch_syn["n_pseudo"])
    n_total = batch_syn["hazy"].shape[0]
    n_plain = n_total - n_pseudo

    # (1) teacher on the synthetic batch (plain slots first, pseudo slots last)
    out_syn = state.teacher.forward(Tensor(batch_syn["hazy"]))
    gt_syn = Tensor(batch_syn["clean"])
    loss_rc = Tensor(0.0)
    loss_per = Tensor(0.0)
    if n_plain > 0:
        out_plain = ad.narrow(out_syn, 0, 0, n_plain)
        gt_plain = ad.narrow(gt_syn, 0, 0, n_plain)
        loss_rc = charbonnier(out_plain, gt_plain, eps)
        if w.per > 0:
            loss_per = feature_loss(out_plain, gt_plain, state.extractor)
    if n_pseudo > 0:
        out_ps = ad.narrow(out_syn, 0, n_plain, n_pseudo)
        gt_ps = ad.narrow(gt_syn, 0, n_plain, n_pseudo)
        loss_rc = loss_rc + w.hda * charbonnier(out_ps, gt_ps, eps)

    # (2) student (EMA shadow) on the real batch
    state.refresh_student()
    student_real = state.student.forward(Tensor(batch_real))

    # (3) unsupervised real-domain evaluation fed back to the teacher
    loss_adv = Tensor(0.0)
    loss_dc = Tensor(0.0)
    unsup_term = Tensor(0.0)
    out_real_detached = None
    if cfg.mutual and (w.adv > 0 or w.dc > 0):
        unsup_input = batch_real if cfg.split_domain else batch_syn["hazy"]
        if cfg.unsup_grad_path == "teacher_forward":
            out_real = state.teacher.forward(Tensor(unsup_input))
            if w.adv > 0:
                loss_adv = adversarial_loss_generator(state.disc.forward(out_real))
            if w.dc > 0:
                loss_dc = dark_channel_loss(out_real, cfg.dc_patch)
            unsup_term = w.adv * loss_adv + w.dc * loss_dc
            out_real_detached = out_real.detach()
        else:  # student_frozen: reward-style scaling of an imitation term
            y_s = (student_real if cfg.split_domain
                   else state.student.forward(Tensor(batch_syn["hazy"])))
            if w.adv > 0:
                loss_adv = adversarial_loss_generator(state.disc.forward(y_s))
            if w.dc > 0:
                loss_dc = dark_channel_loss(y_s, cfg.dc_patch)
            score = w.adv * loss_adv.item() + w.dc * loss_dc.item()
            out_real = state.teacher.forward(Tensor(unsup_input))
            unsup_term = score * charbonnier(out_real, y_s.detach(), eps)
            out_real_detached = out_real.detach()

    total = w.rc * loss_rc + w.per * loss_per + unsup_term

    metrics = {
        "step": state.step,
        "epoch": state.epoch,
        "lr": lr,
        "loss_rc": loss_rc.item(),
        "loss_adv": loss_adv.item(),
        "loss_dc": loss_dc.item(),
        "loss_per": loss_per.item(),
        "loss_total": total.item(),
        "n_pseudo": n_pseudo,
    }
    if not _finite(metrics["loss_total"]):
        raise TrainingAbort("non-finite training loss", metrics)

    # (4) one Adam step on the teacher at the cyclic learning rate
    state.opt_g.zero_grad()
    state.disc.zero_grad()
    total.backward()
    state.opt_g.step(lr)

    # (5) discriminator update: real = clean ground truth, fake = dehazed real
    loss_d = 0.0
    if cfg.mutual and w.adv > 0 and out_real_detached is not None and n_plain > 0:
        state.disc.zero_grad()
        d_real = state.disc.forward(Tensor(batch_syn["clean"][:n_plain]))
        d_fake = state.disc.forward(Tensor(out_real_detached.data))
        d_loss = 0.5 * (bce_loss(d_real, 1.0) + bce_loss(d_fake, 0.0))
        d_loss.backward()
        state.opt_d.step(lr)
        loss_d = d_loss.item()
    metrics["loss_d"] = loss_d

    # (6) student tracks the teacher by EMA
    state.ema.update(state.teacher.parameters())

    # (7) supervised T-Net step
    loss_t = 0.0
    target = batch_syn.get("tnet_target")
    if target is not None and n_plain > 0:
        t_pred = state.tnet.forward(Tensor(batch_syn["clean"][:n_plain]))
        t_loss = charbonnier(t_pred, Tensor(target), eps)
        state.tnet.zero_grad()
        t_loss.backward()
        state.opt_t.step(lr)
        loss_t = t_loss.item()
    metrics["loss_tnet"] = loss_t

    # sample-cycle harvest, gated on the start epoch
    if state.hda_active():
        harvest_pseudo_pairs(state, batch_real, student_real)

    state.step += 1
    return metrics


def harvest_pseudo_pairs(state: TrainState, batch_real: np.ndarray,
                         student_real: Tensor | None = None) -> SampleCycleBuffer:
    """Rebuild pseudo hazy/clean pairs from the student's real-domain output."""
    cfg = state.cfg
    if student_real is None:
        state.refresh_student()
        student_real = state.student.forward(Tensor(batch_real))
    t_est = state.tnet.forward(Tensor(student_real.data))
    for i in range(batch_real.shape[0]):
        x_r = Image(np.clip(batch_real[i], 0.0, 1.0))
        y_r = Image(np.clip(student_real.data[i], 0.0, 1.0))
        t_r = Image(t_est.data[i])
        a = dcp.estimate_airlight(x_r, cfg.dc_patch)
        p = float(state.rng.uniform(cfg.p_min, cfg.p_max))
        rebuilt = hda_rebuild(y_r, t_r, a, p)
        state.buffer.push(PseudoPair(rebuilt, y_r, p, source=f"step{state.step}:{i}"))
    return state.buffer


def _random_transform(rng, img_hw, crop):
    h, w = img_hw
    if crop > h or crop > w:
        raise ValueError(f"crop {crop} exceeds image size {h}x{w}")
    x = int(rng.integers(0, w - crop + 1))
    y = int(rng.integers(0, h - crop + 1))
    rot = ("identity", "rot90", "rot180", "rot270")[int(rng.integers(4))]
    flip = bool(rng.integers(2))
    return (x, y, crop), rot, flip


def _apply(img: Image, crop, rot, flip) -> Image:
    out, _ = augment((img, img), rot, crop)
    if flip:
        out, _ = augment((out, out), "hflip", None)
    return out


def compose_batch(state: TrainState, syn_pool, real_pool) -> tuple:
    """Assemble one training batch: synthetic half (with sample-cycle
    replacement after the start epoch) plus the real half, all augmented."""
    cfg = state.cfg
    rng = state.rng
    half = cfg.batch_size // 2
    plain, pseudo = [], []
    for _ in range(half):
        use_pseudo = (
            state.hda_active()
            and len(state.buffer) > 0
            and rng.random() < cfg.hda_replace_prob
        )
        if use_pseudo:
            pair = state.buffer.sample(rng)
            crop, rot, flip = _random_transform(rng, (pair.hazy.height, pair.hazy.width), cfg.crop)
            pseudo.append((_apply(pair.hazy, crop, rot, flip),
                           _apply(pair.clean, crop, rot, flip)))
        else:
            entry = syn_pool[int(rng.integers(len(syn_pool)))]
            crop, rot, flip = _random_transform(rng, (entry["hazy"].height, entry["hazy"].width), cfg.crop)
            hazy = _apply(entry["hazy"], crop, rot, flip)
            clean = _apply(entry["clean"], crop, rot, flip)
            trans = entry.get("trans")
            if trans is None:
                a = dcp.estimate_airlight(hazy, cfg.dc_patch)
                trans = dcp.estimate_transmission(hazy, a, cfg.dc_patch)
            else:
                trans = _apply(trans, crop, rot, flip)
            plain.append((hazy, clean, trans))

    reals = []
    for _ in range(cfg.batch_size - half):
        img = real_pool[int(rng.integers(len(real_pool)))]
        crop, rot, flip = _random_transform(rng, (img.height, img.width), cfg.crop)
        reals.append(_apply(img, crop, rot, flip))

    hazy = np.stack([p[0].data for p in plain] + [p[0].data for p in pseudo])
    clean = np.stack([p[1].data for p in plain] + [p[1].data for p in pseudo])
    tnet_target = np.stack([p[2].data for p in plain]) if plain else None
    batch_syn = {
        "hazy": hazy,
        "clean": clean,
        "tnet_target": tnet_target,
        "n_pseudo": len(pseudo),
    }
    batch_real = np.stack([r.data for r in reals])
    return batch_syn, batch_real


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _log_line(metrics: dict) -> str:
    return "\t".join(f"{k}={_fmt(v)}" for k, v in metrics.items())


def state_tensors(state: TrainState) -> dict:
    cfg = state.cfg
    out = {}
    for name, p in state.teacher.named_parameters():
        out[f"teacher.{name}"] = p.data
    for (name, _), shadow in zip(state.teacher.named_parameters(), state.ema.shadow):
        out[f"student.{name}"] = shadow
    for name, p in state.tnet.named_parameters():
        out[f"tnet.{name}"] = p.data
    for name, p in state.disc.named_parameters():
        out[f"disc.{name}"] = p.data
    out.update(state.opt_g.state_arrays("opt_g"))
    out.update(state.opt_d.state_arrays("opt_d"))
    out.update(state.opt_t.state_arrays("opt_t"))
    out["meta.step"] = np.array([float(state.step)])
    out["meta.epoch"] = np.array([float(state.epoch)])
    out["meta.seed"] = encode_seed(cfg.seed)
    out["meta.arch"] = np.array(
        [cfg.width, cfg.groups, cfg.blocks_per_group, cfg.tnet_width, cfg.disc_width],
        dtype=np.float64,
    )
    return out


def save_checkpoint(state: TrainState, path) -> None:
    save_tensors(state_tensors(state), path)


def student_from_checkpoint(path) -> DehazeNet:
    """Inference-side loader: rebuild the EMA student from a checkpoint."""
    tensors = load_tensors(path)
    if "meta.arch" not in tensors:
        raise ValueError("checkpoint missing architecture metadata")
    width, groups, blocks, _, _ = (int(v) for v in tensors["meta.arch"])
    net = DehazeNet(np.random.default_rng(0), width, groups, blocks)
    net.load_arrays({name[len("student."):]: arr for name, arr in tensors.items()
                     if name.startswith("student.")})
    for p in net.parameters():
        p.requires_grad = False
    return net


def _holdout_split(names, fraction):
    if len(names) < 2 or fraction <= 0:
        return list(names), []
    n_val = max(1, int(round(len(names) * fraction)))
    n_val = min(n_val, len(names) - 1)
    return list(names[:-n_val]), list(names[-n_val:])


def validate(state: TrainState, val_pairs, val_real) -> dict:
    state.refresh_student()
    out = {"step": state.step, "epoch": state.epoch, "kind": "val"}
    if val_pairs:
        ps, ss_ = [], []
        for entry in val_pairs:
            pred = Image(np.clip(infer_image(state.student, entry["hazy"].data), 0.0, 1.0))
            ps.append(psnr(pred, entry["clean"]))
            ss_.append(ssim(pred, entry["clean"]))
        out["psnr_syn"] = sum(ps) / len(ps)
        out["ssim_syn"] = sum(ss_) / len(ss_)
    if val_real:
        ps = []
        for hazy, ref in val_real:
            pred = Image(np.clip(infer_image(state.student, hazy.data), 0.0, 1.0))
            ps.append(psnr(pred, ref))
        out["psnr_real"] = sum(ps) / len(ps)
    return out


def run_training(cfg: TrainConfig, data_root, run_dir) -> dict:
    """Full training run; writes config snapshot, metrics log and checkpoints."""
    from .datasets import DatasetLayout

    layout = DatasetLayout.open(data_root)
    if not layout.real_names:
        raise ValueError(f"no real hazy images under {data_root}/real")
    train_names, val_names = _holdout_split(layout.pair_names, cfg.val_fraction)
    real_train_names, real_val_names = _holdout_split(layout.real_names, cfg.val_fraction)

    syn_pool = []
    for name in train_names:
        hazy, clean, trans = layout.load_pair(name)
        syn_pool.append({"name": name, "hazy": hazy, "clean": clean, "trans": trans})
    val_pairs = []
    for name in val_names:
        hazy, clean, _ = layout.load_pair(name)
        val_pairs.append({"name": name, "hazy": hazy, "clean": clean})
    real_pool = [layout.load_real(n) for n in real_train_names]
    val_real = []
    for name in real_val_names:
        ref = layout.load_real_gt(name)
        if ref is not None:
            val_real.append((layout.load_real(name), ref))

    os.makedirs(run_dir, exist_ok=True)
    save_config(cfg, os.path.join(run_dir, "config.txt"))
    state = TrainState(cfg)
    log_path = os.path.join(run_dir, "metrics.log")

    steps_per_epoch = max(1, len(syn_pool) // (cfg.batch_size // 2))
    last_val = {}
    with open(log_path, "w", encoding="utf-8", newline="\n") as log:
        for epoch in range(cfg.epochs):
            state.epoch = epoch
            for _ in range(steps_per_epoch):
                batch_syn, batch_real = compose_batch(state, syn_pool, real_pool)
                metrics = train_step(state, batch_syn, batch_real)
                log.write(_log_line(metrics) + "\n")
            if (epoch + 1) % cfg.val_interval == 0 or epoch == cfg.epochs - 1:
                last_val = validate(state, val_pairs, val_real)
                log.write(_log_line(last_val) + "\n")
                save_checkpoint(state, os.path.join(run_dir, f"ckpt_step{state.step}.hzf"))
        if cfg.epochs == 0:
            last_val = validate(state, val_pairs, val_real)
            log.write(_log_line(last_val) + "\n")
    final_path = os.path.join(run_dir, "ckpt_final.hzf")
    save_checkpoint(state, final_path)
    return {"state": state, "final_checkpoint": final_path,
            "metrics_log": log_path, "validation": last_val}
