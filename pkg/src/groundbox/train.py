"""Mini-batch training loop and model evaluation.

Samples inside a batch run one at a time (a full forward/backward graph
per sample, gradients accumulated then averaged); batch order comes from
a per-epoch permutation derived from (seed, epoch) so runs with equal
seeds are byte-for-byte reproducible, logs and checkpoints included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import backward
from .checkpoint import model_fingerprint, save_checkpoint
from .config import Config, config_fingerprint, loss_config, model_dims
from .boxes import iou
from .head import GroundingModel, GroundingSample, predict_detail
from .losses import total_loss
from .metrics import MetricReport, proposal_quality_report
from .optim import Adam
from .synth import DatasetRecord
from .vocab import Vocabulary

LOG_HEADER = "iteration,loss,rank_loss,reg_loss,degenerate,lr"


class TrainAbort(RuntimeError):
    """Non-finite loss; carries the offending iteration."""

    def __init__(self, iteration: int, value: float):
        super().__init__(f"non-finite loss {value} at iteration {iteration}")
        self.iteration = iteration


@dataclass
class TrainResult:
    model: GroundingModel
    log_rows: list[str]
    best_iteration: int
    best_val_accuracy: float
    degenerate_total: int
    final_path: Path | None
    best_path: Path | None
    log_path: Path | None


def _check_dims(records: list[DatasetRecord], d_v: int) -> None:
    for r in records:
        if r.features.shape[1] != d_v:
            raise ValueError(f"sample {r.sample_id}: feature dim "
                             f"{r.features.shape[1]} != configured d_v {d_v}")


def lr_at(cfg: Config, iteration: int) -> float:
    """Step schedule: the decay factor kicks in once, at the configured
    fraction of the run."""
    boundary = int(cfg.train_lr_decay_at * cfg.train_iterations)
    if cfg.train_iterations > 0 and iteration >= boundary:
        return cfg.train_base_lr * cfg.train_lr_decay_factor
    return cfg.train_base_lr


def _epoch_order(seed: int, epoch: int, n: int) -> list[int]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1, epoch]))
    return [int(i) for i in rng.permutation(n)]


def validation_accuracy(model: GroundingModel, samples: list[GroundingSample],
                        threshold: float, use_refinement: bool) -> float:
    if not samples:
        return 0.0
    hits = 0
    for s in samples:
        _, raw_box, refined = predict_detail(s, model)
        box = refined if use_refinement else raw_box
        hits += 1 if iou(box, s.gt_box) > threshold else 0
    return hits / len(samples)


def train(cfg: Config, train_records: list[DatasetRecord],
          val_records: list[DatasetRecord], vocab: Vocabulary,
          out_dir=None) -> TrainResult:
    """Run the configured number of Adam iterations; write the training
    log plus best-by-validation and final checkpoints when out_dir is
    given. Aborts on a non-finite batch loss."""
    dims = model_dims(cfg)
    _check_dims(train_records, dims.d_v)
    _check_dims(val_records, dims.d_v)
    lcfg = loss_config(cfg)

    init_rng = np.random.default_rng(np.random.SeedSequence([cfg.train_seed, 0]))
    model = GroundingModel(vocab, dims, init_rng)
    adam = Adam(model.params(), beta1=cfg.train_beta1, beta2=cfg.train_beta2,
                epsilon=cfg.train_epsilon)

    train_samples = [r.grounding_sample() for r in train_records]
    val_samples = [r.grounding_sample() for r in val_records]

    out = Path(out_dir) if out_dir is not None else None
    final_path = best_path = log_path = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        final_path = out / "final.ckpt"
        best_path = out / "best.ckpt"
        log_path = out / "train_log.csv"

    ckpt_meta = {"config": config_fingerprint(cfg),
                 "fingerprint": model_fingerprint(model)}

    log_rows = [LOG_HEADER]
    order: list[int] = []
    epoch = 0
    window = {"loss": [], "rank": [], "reg": [], "degenerate": 0}
    degenerate_total = 0
    best_iteration = 0
    best_acc = -1.0

    def run_validation(iteration: int) -> None:
        nonlocal best_iteration, best_acc
        acc = validation_accuracy(model, val_samples, cfg.train_eta,
                                  use_refinement=cfg.train_regression)
        if acc > best_acc:
            best_acc = acc
            best_iteration = iteration
            if best_path is not None:
                save_checkpoint(model, best_path,
                                extra_meta={**ckpt_meta,
                                            "best_iteration": iteration,
                                            "val_accuracy": acc})

    for it in range(cfg.train_iterations):
        if len(order) < cfg.train_batch_size:
            order = _epoch_order(cfg.train_seed, epoch, len(train_samples)) + order
            epoch += 1
        batch = [order.pop() for _ in range(cfg.train_batch_size)]

        batch_losses = []
        for idx in batch:
            sample = train_samples[idx]
            scores, offsets = model.forward(sample)
            sl = total_loss(scores, offsets, sample, lcfg)
            if sl.total is not None:
                backward(sl.total)
                batch_losses.append(float(sl.total.data))
            else:
                batch_losses.append(0.0)
            if sl.rank_value is not None:
                window["rank"].append(sl.rank_value)
            if sl.reg_value is not None:
                window["reg"].append(sl.reg_value)
            if sl.degenerate:
                window["degenerate"] += 1
                degenerate_total += 1

        mean_loss = float(np.mean(batch_losses))
        if not math.isfinite(mean_loss):
            raise TrainAbort(it + 1, mean_loss)
        window["loss"].append(mean_loss)

        inv_b = 1.0 / cfg.train_batch_size
        for p in adam.params:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
            p.grad *= inv_b
        if cfg.train_weight_decay > 0.0:
            for p in adam.params:
                p.grad += cfg.train_weight_decay * p.data
        if cfg.train_grad_clip > 0.0:
            norm = math.sqrt(sum(float(np.sum(p.grad * p.grad))
                                 for p in adam.params))
            if norm > cfg.train_grad_clip:
                factor = cfg.train_grad_clip / norm
                for p in adam.params:
                    p.grad *= factor
        adam.step(lr_at(cfg, it))

        iteration = it + 1
        if iteration % cfg.train_val_every == 0 or iteration == cfg.train_iterations:
            run_validation(iteration)
        if iteration % cfg.train_log_every == 0 or iteration == cfg.train_iterations:
            log_rows.append(_format_log_row(cfg, iteration, window, lr_at(cfg, it)))
            window = {"loss": [], "rank": [], "reg": [], "degenerate": 0}

    if best_acc < 0.0:  # zero-iteration run: still emit a best checkpoint
        run_validation(0)
    if final_path is not None:
        save_checkpoint(model, final_path, extra_meta=ckpt_meta)
    if log_path is not None:
        log_path.write_text("\n".join(log_rows) + "\n", encoding="utf-8")

    return TrainResult(model=model, log_rows=log_rows,
                       best_iteration=best_iteration,
                       best_val_accuracy=max(best_acc, 0.0),
                       degenerate_total=degenerate_total,
                       final_path=final_path, best_path=best_path,
                       log_path=log_path)


def _format_log_row(cfg: Config, iteration: int, window: dict, lr: float) -> str:
    mean = lambda xs: repr(float(np.mean(xs))) if xs else ""
    return (f"{iteration},{mean(window['loss'])},{mean(window['rank'])},"
            f"{mean(window['reg'])},{window['degenerate']},{lr!r}")


# ---------------------------------------------------------------------------
# evaluation


def evaluate(model: GroundingModel, records: list[DatasetRecord],
             eta: float = 0.5, use_refinement: bool = True
             ) -> tuple[MetricReport, list[dict]]:
    """Metric report plus one machine-readable prediction row per sample.

    ``accuracy`` follows the model's prediction rule (refined box when
    the regression head was trained, raw argmax box otherwise);
    ``unrefined_accuracy`` always scores the raw argmax proposal.
    """
    if not records:
        raise ValueError("evaluate: empty dataset")
    _check_dims(records, model.dims.d_v)

    refined_hits = 0
    raw_hits = 0
    degenerate = 0
    dump: list[dict] = []
    for r in records:
        sample = r.grounding_sample()
        k, raw_box, refined_box = predict_detail(sample, model)
        refined_ok = iou(refined_box, r.gt_box) > eta
        raw_ok = iou(raw_box, r.gt_box) > eta
        refined_hits += 1 if refined_ok else 0
        raw_hits += 1 if raw_ok else 0
        if max(iou(b, r.gt_box) for b in r.boxes) <= eta:
            degenerate += 1
        correct = refined_ok if use_refinement else raw_ok
        dump.append({
            "id": r.sample_id,
            "chosen_index": k,
            "raw_box": list(raw_box.as_tuple()),
            "refined_box": list(refined_box.as_tuple()),
            "correct": bool(correct),
        })

    report = proposal_quality_report([r.eval_sample() for r in records],
                                     threshold=eta)
    report.accuracy = (refined_hits if use_refinement else raw_hits) / len(records)
    report.unrefined_accuracy = raw_hits / len(records)
    report.degenerate_count = degenerate
    report.num_proposals = len(records[0].boxes)
    report.extras["refined_accuracy"] = refined_hits / len(records)
    return report, dump
