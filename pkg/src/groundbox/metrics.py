"""Proposal-quality metrics and grounding accuracy.

Discrimination: fraction of samples where at least one proposal covers
the ground truth (IoU strictly above the threshold). Diversity: the
reciprocal of the mean number of covering proposals per sample - high
means little redundancy. Both use the same coverage threshold as the
training-label construction, by design.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .boxes import BBox, ImageSize, iou

COVER_THRESHOLD = 0.5


@dataclass(frozen=True)
class EvalSample:
    proposal_boxes: list[BBox]
    gt_box: BBox
    image: ImageSize


@dataclass
class MetricReport:
    s_dis: float
    s_div: float | None
    s_div_reason: str | None
    num_samples: int
    covered_total: int
    accuracy: float | None = None
    unrefined_accuracy: float | None = None
    degenerate_count: int | None = None
    num_proposals: int | None = None
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "s_dis": self.s_dis,
            "s_div": self.s_div,
            "s_div_reason": self.s_div_reason,
            "num_samples": self.num_samples,
            "covered_total": self.covered_total,
            "accuracy": self.accuracy,
            "unrefined_accuracy": self.unrefined_accuracy,
            "degenerate_count": self.degenerate_count,
            "num_proposals": self.num_proposals,
        }
        out.update(self.extras)
        return out


def covers(proposal: BBox, gt: BBox, threshold: float = COVER_THRESHOLD) -> int:
    """1 iff IoU is strictly greater than the threshold."""
    return 1 if iou(proposal, gt) > threshold else 0


def covered_count(sample: EvalSample, threshold: float = COVER_THRESHOLD) -> int:
    return sum(covers(p, sample.gt_box, threshold) for p in sample.proposal_boxes)


def discrimination_score(samples: list[EvalSample],
                         threshold: float = COVER_THRESHOLD) -> float:
    """Fraction of samples with at least one covering proposal."""
    if not samples:
        raise ValueError("discrimination_score: empty sample list")
    hits = sum(1 for s in samples if covered_count(s, threshold) > 0)
    return hits / len(samples)


def diversity_score(samples: list[EvalSample],
                    threshold: float = COVER_THRESHOLD) -> float | None:
    """Reciprocal of the mean covering-proposal count per sample.

    None when no proposal covers anywhere (the reciprocal is undefined);
    callers report the reason instead of faking a value.
    """
    if not samples:
        raise ValueError("diversity_score: empty sample list")
    total = sum(covered_count(s, threshold) for s in samples)
    if total == 0:
        return None
    return 1.0 / (total / len(samples))


def proposal_quality_report(samples: list[EvalSample],
                            threshold: float = COVER_THRESHOLD) -> MetricReport:
    total = sum(covered_count(s, threshold) for s in samples)
    s_div = diversity_score(samples, threshold)
    return MetricReport(
        s_dis=discrimination_score(samples, threshold),
        s_div=s_div,
        s_div_reason=None if s_div is not None else "no covering proposals",
        num_samples=len(samples),
        covered_total=total,
    )


def grounding_accuracy(predictions: list[BBox], gts: list[BBox],
                       threshold: float = COVER_THRESHOLD) -> float:
    """Fraction of predictions overlapping ground truth at IoU above the
    threshold."""
    if len(predictions) != len(gts):
        raise ValueError(f"grounding_accuracy: {len(predictions)} predictions vs "
                         f"{len(gts)} ground truths")
    if not predictions:
        raise ValueError("grounding_accuracy: empty input")
    correct = sum(1 for p, g in zip(predictions, gts) if iou(p, g) > threshold)
    return correct / len(predictions)
