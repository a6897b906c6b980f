"""Ablation harness: loss variants and proposal-quality presets.

Runs a grid of (preset, ranking variant, regression on/off) cells over
several seeds on shared synthetic datasets, then checks the expected
orderings: soft-label ranking beats the single-label baseline, adding
the regression head beats not having it, and accuracy tracks proposal
quality across the low/mid/high presets.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .checkpoint import load_checkpoint
from .config import Config, config_fingerprint, quality_config, scene_config
from .losses import RANKING_VARIANTS
from .metrics import proposal_quality_report
from .synth import (PrototypeTable, generate_split, prototype_rng,
                    quality_fingerprint, write_dataset, read_dataset,
                    QUALITY_PRESETS)
from .train import TrainAbort, evaluate, train
from .vocab import Vocabulary, build_vocab

SPLITS = (("train", 0), ("val", 1), ("test", 2))


@dataclass(frozen=True)
class AblationCell:
    preset: str
    variant: str
    regression: bool

    @property
    def name(self) -> str:
        suffix = "+reg" if self.regression else ""
        return f"{self.preset}/{self.variant}{suffix}"


def loss_table_cells(preset: str = "high") -> list[AblationCell]:
    return [AblationCell(preset, "softmax_single_label", False),
            AblationCell(preset, "kld", False),
            AblationCell(preset, "softmax_single_label", True),
            AblationCell(preset, "kld", True)]


def preset_table_cells() -> list[AblationCell]:
    return [AblationCell(p, "kld", True) for p in ("low", "mid", "high")]


def cells_for(which: str) -> list[AblationCell]:
    if which == "table2":
        return loss_table_cells()
    if which == "table1":
        return preset_table_cells()
    if which == "all":
        cells = loss_table_cells() + preset_table_cells()
        seen: set[str] = set()
        unique = []
        for c in cells:
            if c.name not in seen:
                seen.add(c.name)
                unique.append(c)
        return unique
    return [parse_cell_name(part) for part in which.split(",")]


def parse_cell_name(name: str) -> AblationCell:
    try:
        preset, rest = name.strip().split("/", 1)
    except ValueError:
        raise ValueError(f"bad cell name {name!r}; expected preset/variant[+reg]")
    regression = rest.endswith("+reg")
    variant = rest[:-4] if regression else rest
    if preset not in QUALITY_PRESETS:
        raise ValueError(f"bad cell name {name!r}: unknown preset {preset!r}")
    if variant not in RANKING_VARIANTS:
        raise ValueError(f"bad cell name {name!r}: unknown variant {variant!r}")
    return AblationCell(preset, variant, regression)


def generate_data_dir(cfg: Config, out_dir, log=print) -> dict[str, Path]:
    """Train/val/test files plus the train-split vocabulary for one
    config; split rng streams are disjoint by construction."""
    out_dir = Path(out_dir)
    scfg = scene_config(cfg)
    quality = quality_config(cfg)
    protos = PrototypeTable(cfg.data_d_v, prototype_rng(cfg.data_seed),
                            scfg.num_shapes, scfg.num_colors)
    counts = {"train": cfg.data_train_samples, "val": cfg.data_val_samples,
              "test": cfg.data_test_samples}
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    train_records = None
    for split, split_id in SPLITS:
        records = generate_split(cfg.data_seed, split_id, counts[split], scfg,
                                 quality, protos, cfg.data_num_proposals)
        if split == "train":
            train_records = records
        meta = {"seed": cfg.data_seed, "split": split, "count": counts[split],
                "preset": cfg.data_preset, "quality": quality_fingerprint(quality),
                "d_v": cfg.data_d_v, "num_proposals": cfg.data_num_proposals,
                "image_w": cfg.data_image_w, "image_h": cfg.data_image_h}
        path = out_dir / f"{split}.jsonl"
        write_dataset(records, path, meta)
        paths[split] = path
    vocab = build_vocab([r.query for r in train_records],
                        min_freq=cfg.data_vocab_min_freq)
    vocab_path = out_dir / "vocab.txt"
    vocab.save(vocab_path)
    paths["vocab"] = vocab_path
    log(f"  data[{cfg.data_preset}]: {counts['train']}/{counts['val']}/"
        f"{counts['test']} samples -> {out_dir}")
    return paths


def _generate_preset_data(cfg: Config, preset: str, out_dir: Path,
                          log=print) -> dict[str, Path]:
    """Pure-preset data for ablation cells; scenes and queries are
    identical across presets (only proposal quality differs)."""
    pcfg = dataclasses.replace(cfg, data_preset=preset,
                               quality_miss_prob=-1.0, quality_jitter=-1.0,
                               quality_distractor_frac=-1.0,
                               quality_feat_noise=-1.0, quality_redundancy=-1,
                               quality_oversize=-1.0)
    return generate_data_dir(pcfg, out_dir, log)


def run_ablation(cfg: Config, out_dir, which: str = "all",
                 log=print) -> dict:
    """Train every cell x seed, evaluate on the matching test split, and
    assemble the run report with ordering verdicts."""
    cells = cells_for(which)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [cfg.train_seed + i for i in range(cfg.ablate_seeds)]

    presets = sorted({c.preset for c in cells})
    data_paths: dict[str, dict[str, Path]] = {}
    datasets: dict[str, dict] = {}
    for preset in presets:
        data_paths[preset] = _generate_preset_data(cfg, preset,
                                                   out / "data" / preset, log)
        test_records, _ = read_dataset(data_paths[preset]["test"])
        q = proposal_quality_report([r.eval_sample() for r in test_records],
                                    threshold=cfg.train_eta)
        datasets[preset] = {"s_dis": q.s_dis, "s_div": q.s_div,
                            "s_div_reason": q.s_div_reason,
                            "test_samples": q.num_samples}
        log(f"  quality[{preset}]: s_dis={q.s_dis:.3f} "
            f"s_div={q.s_div if q.s_div is None else round(q.s_div, 3)}")

    cell_rows = []
    means: dict[str, float] = {}
    for cell in cells:
        paths = data_paths[cell.preset]
        train_records, _ = read_dataset(paths["train"])
        val_records, _ = read_dataset(paths["val"])
        test_records, _ = read_dataset(paths["test"])
        vocab = Vocabulary.load(paths["vocab"])
        accs = []
        status = "ok"
        for seed in seeds:
            run_cfg = dataclasses.replace(
                cfg, data_preset=cell.preset, train_variant=cell.variant,
                train_regression=cell.regression, train_seed=seed)
            run_dir = out / "runs" / cell.name.replace("/", "_") / f"seed{seed}"
            try:
                result = train(run_cfg, train_records, val_records, vocab,
                               out_dir=run_dir)
                best_model, _ = load_checkpoint(result.best_path)
                report, _ = evaluate(best_model, test_records,
                                     eta=cfg.train_eta,
                                     use_refinement=cell.regression)
                accs.append(report.accuracy)
                log(f"  run {cell.name} seed={seed}: "
                    f"acc={report.accuracy:.3f} (best it {result.best_iteration})")
            except TrainAbort as e:
                status = f"failed: {e}"
                log(f"  run {cell.name} seed={seed}: {status}")
                break
        row = {"name": cell.name, "preset": cell.preset, "variant": cell.variant,
               "regression": cell.regression, "status": status,
               "accuracies": accs,
               "mean": sum(accs) / len(accs) if accs else None,
               "min": min(accs) if accs else None,
               "max": max(accs) if accs else None}
        cell_rows.append(row)
        if status == "ok" and accs:
            means[cell.name] = row["mean"]

    verdicts = compute_verdicts(means)
    report = {"config": config_fingerprint(cfg), "seeds": seeds,
              "which": which, "datasets": datasets, "cells": cell_rows,
              "verdicts": verdicts}
    write_run_report(report, out)
    return report


def compute_verdicts(means: dict[str, float]) -> dict:
    """Ordering checks over cell means; None when a needed cell is absent."""

    def gap(hi: str, lo: str):
        if hi in means and lo in means:
            return means[hi] > means[lo]
        return None

    verdicts = {
        "kld_beats_softmax": gap("high/kld", "high/softmax_single_label"),
        "regression_helps_softmax": gap("high/softmax_single_label+reg",
                                        "high/softmax_single_label"),
        "regression_helps_kld": gap("high/kld+reg", "high/kld"),
    }
    presets = ["low/kld+reg", "mid/kld+reg", "high/kld+reg"]
    if all(p in means for p in presets):
        verdicts["preset_monotone"] = (means[presets[0]] < means[presets[1]]
                                       < means[presets[2]])
    else:
        verdicts["preset_monotone"] = None
    return verdicts


def write_run_report(report: dict, out_dir: Path) -> None:
    """Both machine (line-delimited) and human (table) forms."""
    jsonl = out_dir / "report.jsonl"
    with open(jsonl, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"kind": "header", "config": report["config"],
                             "seeds": report["seeds"], "which": report["which"]},
                            sort_keys=True) + "\n")
        for preset, info in sorted(report["datasets"].items()):
            fh.write(json.dumps({"kind": "dataset", "preset": preset, **info},
                                sort_keys=True) + "\n")
        for row in sorted(report["cells"], key=lambda r: r["name"]):
            fh.write(json.dumps({"kind": "cell", **row}, sort_keys=True) + "\n")
        fh.write(json.dumps({"kind": "verdicts", **report["verdicts"]},
                            sort_keys=True) + "\n")

    lines = ["ablation report", "==============="]
    lines.append("")
    lines.append("datasets (test split):")
    for preset, info in sorted(report["datasets"].items()):
        s_div = "undefined" if info["s_div"] is None else f"{info['s_div']:.4f}"
        lines.append(f"  {preset:<5} s_dis={info['s_dis']:.4f} s_div={s_div} "
                     f"samples={info['test_samples']}")
    lines.append("")
    lines.append(f"{'cell':<32}{'mean':>8}{'min':>8}{'max':>8}  per-seed")
    for row in sorted(report["cells"], key=lambda r: r["name"]):
        if row["accuracies"]:
            per_seed = ",".join(f"{a:.4f}" for a in row["accuracies"])
            lines.append(f"{row['name']:<32}{row['mean']:>8.4f}"
                         f"{row['min']:>8.4f}{row['max']:>8.4f}  {per_seed}")
        else:
            lines.append(f"{row['name']:<32}{row['status']}")
    lines.append("")
    lines.append("verdicts:")
    for key, value in report["verdicts"].items():
        rendered = "n/a (missing cells)" if value is None else ("PASS" if value else "FAIL")
        lines.append(f"  {key}: {rendered}")
    (out_dir / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
