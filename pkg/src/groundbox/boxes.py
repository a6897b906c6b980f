"""Axis-aligned box arithmetic.

Boxes are continuous corner coordinates (x_tl, y_tl, x_br, y_br) in
pixels; area is (x_br-x_tl)*(y_br-y_tl) with no +1 correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BBox:
    x_tl: float
    y_tl: float
    x_br: float
    y_br: float

    def __post_init__(self):
        coords = (self.x_tl, self.y_tl, self.x_br, self.y_br)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"BBox: non-finite coordinates {coords}")
        if self.x_br < self.x_tl or self.y_br < self.y_tl:
            raise ValueError(f"BBox: corners out of order {coords}")

    @property
    def width(self) -> float:
        return self.x_br - self.x_tl

    @property
    def height(self) -> float:
        return self.y_br - self.y_tl

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_tl + self.x_br), 0.5 * (self.y_tl + self.y_br))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_tl, self.y_tl, self.x_br, self.y_br)


@dataclass(frozen=True)
class ImageSize:
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"ImageSize: non-positive size ({self.w}, {self.h})")


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0 for degenerate boxes or empty union."""
    ix = min(a.x_br, b.x_br) - max(a.x_tl, b.x_tl)
    iy = min(a.y_br, b.y_br) - max(a.y_tl, b.y_tl)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def clip_box(b: BBox, img: ImageSize) -> BBox:
    """Clamp a box to [0,W]x[0,H], preserving corner ordering."""
    x_tl = min(max(b.x_tl, 0.0), img.w)
    y_tl = min(max(b.y_tl, 0.0), img.h)
    x_br = min(max(b.x_br, 0.0), img.w)
    y_br = min(max(b.y_br, 0.0), img.h)
    return BBox(x_tl, y_tl, max(x_tl, x_br), max(y_tl, y_br))


def union_box(boxes: list[BBox]) -> BBox:
    """Smallest box enclosing all inputs (multi-ground-truth merge)."""
    if not boxes:
        raise ValueError("union_box: empty list")
    return BBox(min(b.x_tl for b in boxes), min(b.y_tl for b in boxes),
                max(b.x_br for b in boxes), max(b.y_br for b in boxes))


def spatial_feature(b: BBox, img: ImageSize) -> list[float]:
    """The 5-D dimensionless location descriptor of a box in its image:
    [x_tl/W, y_tl/H, x_br/W, y_br/H, area/(W*H)]."""
    return [b.x_tl / img.w, b.y_tl / img.h, b.x_br / img.w, b.y_br / img.h,
            (b.width * b.height) / (img.w * img.h)]


def encode_regression(proposal: BBox, target: BBox) -> list[float]:
    """Center/log-size offsets from a proposal to a target box.

    Targets with zero width or height are floored to 1 pixel so the log
    ratios stay finite.
    """
    if proposal.width <= 0.0 or proposal.height <= 0.0:
        raise ValueError(f"encode_regression: zero-size proposal {proposal.as_tuple()}")
    pw, ph = proposal.width, proposal.height
    pcx, pcy = proposal.center
    tw = max(target.width, 1.0)
    th = max(target.height, 1.0)
    tcx, tcy = target.center
    return [(tcx - pcx) / pw, (tcy - pcy) / ph,
            math.log(tw / pw), math.log(th / ph)]


def decode_regression(proposal: BBox, t, img: ImageSize) -> BBox:
    """Inverse of :func:`encode_regression`, clipped to the image."""
    if proposal.width <= 0.0 or proposal.height <= 0.0:
        raise ValueError(f"decode_regression: zero-size proposal {proposal.as_tuple()}")
    tx, ty, tw, th = (float(v) for v in t)
    if not all(math.isfinite(v) for v in (tx, ty, tw, th)):
        raise ValueError(f"decode_regression: non-finite offsets {list(t)}")
    pcx, pcy = proposal.center
    cx = pcx + tx * proposal.width
    cy = pcy + ty * proposal.height
    w = proposal.width * math.exp(tw)
    h = proposal.height * math.exp(th)
    raw = BBox(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)
    return clip_box(raw, img)
