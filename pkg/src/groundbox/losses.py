"""Ranking and refinement losses.

The ranking target is a soft label distribution: proposal IoUs against
the ground-truth box, zeroed at or below the threshold eta, then
L1-normalized. Ranking is trained with the KL divergence between that
distribution and the predicted score distribution (scaled by 1/N), or
with the classical single-label softmax baseline. Refinement uses the
smooth-L1 penalty on center/log-size offsets, averaged over proposals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .boxes import encode_regression, iou
from .head import GroundingSample

LOG_EPS = 1e-12  # added before every log

RANKING_VARIANTS = ("kld", "softmax_single_label")


@dataclass(frozen=True)
class SoftLabelDistribution:
    values: np.ndarray
    degenerate: bool


@dataclass(frozen=True)
class LossConfig:
    eta: float = 0.5
    gamma: float = 1.0
    variant: str = "kld"
    regression: bool = True
    # Default: regress only proposals with IoU > eta (the convention of
    # the detector the smooth-L1 machinery comes from). Set false to
    # average the penalty over every proposal; offsets to the ground
    # truth from unrelated proposals are then pure noise, which in
    # practice swamps the head and makes refinement hurt.
    reg_mask_by_iou: bool = True

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"LossConfig: eta {self.eta} outside (0, 1)")
        if self.gamma < 0.0:
            raise ValueError(f"LossConfig: negative gamma {self.gamma}")
        if self.variant not in RANKING_VARIANTS:
            raise ValueError(f"LossConfig: unknown variant {self.variant!r}")


def soft_labels(ious, eta: float) -> SoftLabelDistribution:
    """Threshold (strictly greater) and L1-normalize proposal IoUs.

    All entries zeroed -> the degenerate all-zero distribution.
    """
    arr = np.asarray(ious, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"soft_labels: IoU outside [0,1]: {arr}")
    kept = np.where(arr > eta, arr, 0.0)
    total = kept.sum()
    if total == 0.0:
        return SoftLabelDistribution(np.zeros_like(arr), degenerate=True)
    return SoftLabelDistribution(kept / total, degenerate=False)


def kld_loss(s_star: SoftLabelDistribution, s: Tensor) -> Tensor:
    """(1/N) * sum_i s*_i log(s*_i / s_i), numerically floored logs.

    Zero-label entries contribute exactly 0.
    """
    if s_star.degenerate:
        raise ValueError("kld_loss: degenerate soft labels (apply the skip policy)")
    sv = s_star.values
    if sv.shape != s.data.shape:
        raise ValueError(f"kld_loss: label shape {sv.shape} != score shape {s.data.shape}")
    n = sv.shape[0]
    entropy = float(np.dot(sv, np.log(sv + LOG_EPS)))
    cross = ad.matmul(ad.constant(sv), ad.log(ad.addc(s, LOG_EPS)))
    return ad.scale(ad.addc(ad.scale(cross, -1.0), entropy), 1.0 / n)


def softmax_single_label_loss(s: Tensor, ious) -> Tensor:
    """Cross-entropy against a one-hot at the max-IoU proposal
    (lowest index on ties); the ablation baseline."""
    arr = np.asarray(ious, dtype=np.float64)
    if arr.shape != s.data.shape:
        raise ValueError(f"softmax_single_label_loss: {arr.shape} != {s.data.shape}")
    onehot = np.zeros_like(arr)
    onehot[int(np.argmax(arr))] = 1.0
    picked = ad.matmul(ad.constant(onehot), s)
    return ad.scale(ad.log(ad.addc(picked, LOG_EPS)), -1.0)


def smooth_l1_reg_loss(t_pred: list[Tensor], t_star) -> Tensor:
    """(1/N) * sum over proposals and coords of the smooth-L1 penalty."""
    targets = [np.asarray(t, dtype=np.float64) for t in t_star]
    if len(t_pred) != len(targets):
        raise ValueError(f"smooth_l1_reg_loss: {len(t_pred)} predictions vs "
                         f"{len(targets)} targets")
    if not t_pred:
        raise ValueError("smooth_l1_reg_loss: empty input")
    diffs = [ad.sub(p, ad.constant(t)) for p, t in zip(t_pred, targets)]
    per_coord = ad.smooth_l1(ad.concat(diffs))
    return ad.scale(ad.vsum(per_coord), 1.0 / len(t_pred))


@dataclass
class SampleLoss:
    """Loss breakdown for one sample; tensors feed backward, floats feed logs."""
    total: Tensor | None
    rank_value: float | None
    reg_value: float | None
    degenerate: bool


def total_loss(scores: Tensor, offsets: list[Tensor], sample: GroundingSample,
               cfg: LossConfig) -> SampleLoss:
    """Combined objective L_rank + gamma * L_reg for one sample.

    Degenerate soft labels (no proposal IoU above eta) skip the ranking
    term entirely; the caller counts such samples. With regression also
    absent, ``total`` is None and there is nothing to optimize.
    """
    ious = [iou(p.box, sample.gt_box) for p in sample.proposals]
    labels = soft_labels(ious, cfg.eta)

    rank: Tensor | None = None
    if not labels.degenerate:
        if cfg.variant == "kld":
            rank = kld_loss(labels, scores)
        else:
            rank = softmax_single_label_loss(scores, ious)

    reg: Tensor | None = None
    if cfg.regression:
        if cfg.reg_mask_by_iou:
            keep = [i for i, v in enumerate(ious) if v > cfg.eta]
        else:
            keep = list(range(len(sample.proposals)))
        if keep:
            targets = [encode_regression(sample.proposals[i].box, sample.gt_box)
                       for i in keep]
            reg = smooth_l1_reg_loss([offsets[i] for i in keep], targets)

    if rank is not None and reg is not None:
        total = ad.add(rank, ad.scale(reg, cfg.gamma))
    elif rank is not None:
        total = rank
    elif reg is not None:
        total = ad.scale(reg, cfg.gamma)
    else:
        total = None

    return SampleLoss(
        total=total,
        rank_value=None if rank is None else float(rank.data),
        reg_value=None if reg is None else float(reg.data),
        degenerate=labels.degenerate,
    )
