"""Proposal scoring and refinement on top of the query feature.

Per proposal: normalize-and-tag the visual feature, concat with the
query feature, one fused ReLU layer, then two linear heads - a scalar
ranking score (softmaxed across the sample's proposals) and a 4-vector
of box offsets. Test-time prediction picks the top-scoring proposal and
decodes its offsets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .boxes import BBox, ImageSize, decode_regression, spatial_feature
from .encoder import QueryEncoderParams, encode_query
from .optim import xavier_init, zeros_init
from .vocab import Vocabulary


@dataclass(frozen=True)
class Proposal:
    box: BBox
    visual_feature: np.ndarray  # (d_v,)


@dataclass(frozen=True)
class GroundingSample:
    """One training/eval unit."""
    image: ImageSize
    proposals: list[Proposal]
    tokens: list[str]
    gt_box: BBox

    def __post_init__(self):
        if not self.proposals:
            raise ValueError("GroundingSample: no proposals")
        if not self.tokens:
            raise ValueError("GroundingSample: empty query")


@dataclass(frozen=True)
class ModelDims:
    d_v: int
    d_e: int
    d_q: int
    d_o: int


class GroundingHeadParams:
    """Fusion layer plus score and regression heads."""

    def __init__(self, dims: ModelDims, rng: np.random.Generator):
        d_in = dims.d_q + dims.d_v + 5
        self.dims = dims
        self.w_fuse = xavier_init((d_in, dims.d_o), rng)
        self.b_fuse = zeros_init((dims.d_o,))
        self.w_score = xavier_init((dims.d_o, 1), rng)
        self.b_score = zeros_init((1,))
        self.w_reg = xavier_init((dims.d_o, 4), rng)
        self.b_reg = zeros_init((4,))

    def named_params(self) -> list[tuple[str, Tensor]]:
        return [("w_fuse", self.w_fuse), ("b_fuse", self.b_fuse),
                ("w_score", self.w_score), ("b_score", self.b_score),
                ("w_reg", self.w_reg), ("b_reg", self.b_reg)]


def assemble_visual_feature(p: Proposal, img: ImageSize) -> np.ndarray:
    """L2-normalized appearance vector with the 5-D spatial tail appended.

    Input features carry no gradient, so this is plain numpy; a zero
    appearance vector passes through unnormalized.
    """
    vis = np.asarray(p.visual_feature, dtype=np.float64)
    if vis.ndim != 1:
        raise ValueError(f"assemble_visual_feature: expected 1-D feature, "
                         f"got shape {vis.shape}")
    norm = float(np.linalg.norm(vis))
    if norm > 0.0:
        vis = vis / norm
    return np.concatenate([vis, np.asarray(spatial_feature(p.box, img))])


def fuse(q: Tensor, v: np.ndarray, head: GroundingHeadParams) -> Tensor:
    """ReLU(W^T (q || v) + b) -> fused feature of size d_o."""
    joint = ad.concat([q, ad.constant(v)])
    return ad.relu(ad.add(ad.matmul(joint, head.w_fuse), head.b_fuse))


def score_all(fused: list[Tensor], head: GroundingHeadParams) -> Tensor:
    """Per-proposal linear scores, softmax-normalized across the sample."""
    if not fused:
        raise ValueError("score_all: empty proposal list")
    raw = [ad.add(ad.matmul(f, head.w_score), head.b_score) for f in fused]
    return ad.softmax(ad.concat(raw))


def regress_all(fused: list[Tensor], head: GroundingHeadParams) -> list[Tensor]:
    """One 4-vector of center/log-size offsets per proposal."""
    if not fused:
        raise ValueError("regress_all: empty proposal list")
    return [ad.add(ad.matmul(f, head.w_reg), head.b_reg) for f in fused]


class GroundingModel:
    """Vocabulary, query encoder, and grounding head as one trainable unit."""

    def __init__(self, vocab: Vocabulary, dims: ModelDims,
                 rng: np.random.Generator):
        self.vocab = vocab
        self.dims = dims
        self.encoder = QueryEncoderParams(vocab.size, dims.d_e, dims.d_q, rng)
        self.head = GroundingHeadParams(dims, rng)

    def named_params(self) -> list[tuple[str, Tensor]]:
        return self.encoder.named_params() + self.head.named_params()

    def params(self) -> list[Tensor]:
        return [p for _, p in self.named_params()]

    def forward(self, sample: GroundingSample) -> tuple[Tensor, list[Tensor]]:
        """Score distribution (N,) and per-proposal offset tensors."""
        for p in sample.proposals:
            if len(p.visual_feature) != self.dims.d_v:
                raise ValueError(f"forward: feature length {len(p.visual_feature)} "
                                 f"!= d_v {self.dims.d_v}")
        indices = [self.vocab.index_of(t) for t in sample.tokens]
        q = encode_query(indices, self.encoder)
        fused = [fuse(q, assemble_visual_feature(p, sample.image), self.head)
                 for p in sample.proposals]
        return score_all(fused, self.head), regress_all(fused, self.head)


def predict_detail(sample: GroundingSample,
                   model: GroundingModel) -> tuple[int, BBox, BBox]:
    """(argmax index, that proposal's raw box, its refinement-decoded box).

    Ties in the score distribution break toward the lowest index.
    """
    scores, offsets = model.forward(sample)
    k = int(np.argmax(scores.data))
    chosen = sample.proposals[k]
    refined = decode_regression(chosen.box, offsets[k].data, sample.image)
    return k, chosen.box, refined


def predict(sample: GroundingSample, model: GroundingModel) -> BBox:
    """Test-time rule: highest-scoring proposal, refined box as output."""
    return predict_detail(sample, model)[2]
