"""Phrase-to-box visual grounding, built from scratch.

A query phrase is LSTM-encoded, fused with each proposal's visual+
spatial feature, and trained to rank proposals against soft IoU labels
(KL divergence) while a parallel head regresses box refinements.
Synthetic scene data with tunable proposal quality replaces a real
detector, and discrimination/diversity metrics grade the proposals
themselves.
"""

from .autodiff import Tensor, backward
from .boxes import BBox, ImageSize, iou
from .config import Config, load_config
from .head import GroundingModel, GroundingSample, ModelDims, Proposal, predict
from .losses import LossConfig, kld_loss, smooth_l1_reg_loss, soft_labels
from .metrics import (EvalSample, MetricReport, discrimination_score,
                      diversity_score, grounding_accuracy)
from .vocab import Vocabulary, build_vocab, tokenize

__all__ = [
    "Tensor", "backward", "BBox", "ImageSize", "iou", "Config", "load_config",
    "GroundingModel", "GroundingSample", "ModelDims", "Proposal", "predict",
    "LossConfig", "kld_loss", "smooth_l1_reg_loss", "soft_labels",
    "EvalSample", "MetricReport", "discrimination_score", "diversity_score",
    "grounding_accuracy", "Vocabulary", "build_vocab", "tokenize",
]

__version__ = "0.1.0"
