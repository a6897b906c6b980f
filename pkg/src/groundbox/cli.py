"""Command-line surface: generate / train / eval / ablate.

Exit status: 0 on success, 1 on a validation error (bad config or
arguments, refusing to overwrite, fingerprint mismatch), 2 on a runtime
abort (non-finite loss, generation failure).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .ablate import generate_data_dir, run_ablation
from .checkpoint import load_checkpoint
from .config import (Config, ConfigError, config_fingerprint, load_config)
from .metrics import MetricReport
from .synth import GenerationError, read_dataset
from .train import TrainAbort, evaluate, train
from .vocab import Vocabulary


class ValidationFailure(ValueError):
    """CLI-level rejection -> exit status 1."""


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None,
                   help="flat key=value config file (defaults are desk scale)")
    p.add_argument("--seed", type=int, default=None,
                   help="override the command's primary seed")
    p.add_argument("--set", dest="sets", action="append", default=[],
                   metavar="KEY=VALUE", help="override one config key")


def _build_config(args, seed_key: str | None) -> Config:
    overrides: dict[str, str] = {}
    for item in args.sets:
        if "=" not in item:
            raise ValidationFailure(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.seed is not None and seed_key is not None:
        overrides[seed_key] = str(args.seed)
    return load_config(args.config, overrides)


def cmd_generate(args) -> int:
    cfg = _build_config(args, "data.seed")
    out = Path(args.out)
    existing = [p for p in ("train.jsonl", "val.jsonl", "test.jsonl", "vocab.txt")
                if (out / p).exists()]
    if existing and not args.overwrite:
        raise ValidationFailure(
            f"{out}: dataset files already present ({', '.join(existing)}); "
            f"pass --overwrite to replace them")
    generate_data_dir(cfg, out)
    return 0


def _load_split(data_dir: Path, split: str):
    path = data_dir / f"{split}.jsonl"
    if not path.exists():
        raise ValidationFailure(f"missing dataset file {path}")
    return read_dataset(path)[0]


def cmd_train(args) -> int:
    cfg = _build_config(args, "train.seed")
    if args.variant is not None:
        cfg = dataclasses.replace(cfg, train_variant=args.variant)
    if args.no_regression:
        cfg = dataclasses.replace(cfg, train_regression=False)
    if args.iterations is not None:
        cfg = dataclasses.replace(cfg, train_iterations=args.iterations)
    cfg.validate()
    data_dir = Path(args.data)
    train_records = _load_split(data_dir, "train")
    val_records = _load_split(data_dir, "val")
    vocab_path = data_dir / "vocab.txt"
    if not vocab_path.exists():
        raise ValidationFailure(f"missing vocabulary file {vocab_path}")
    vocab = Vocabulary.load(vocab_path)
    try:
        result = train(cfg, train_records, val_records, vocab, out_dir=args.out)
    except ValueError as e:
        raise ValidationFailure(str(e)) from e
    print(f"variant={cfg.train_variant} regression={cfg.train_regression}")
    print(f"best val accuracy {result.best_val_accuracy:.4f} "
          f"at iteration {result.best_iteration}")
    print(f"wrote {result.final_path}, {result.best_path}, {result.log_path}")
    return 0


def _render_report(report: MetricReport, fingerprint: dict) -> str:
    d = report.as_dict()
    lines = ["evaluation report", "================="]
    s_div = ("undefined ({})".format(report.s_div_reason)
             if report.s_div is None else f"{report.s_div:.6f}")
    lines.append(f"samples:             {report.num_samples}")
    lines.append(f"accuracy:            {report.accuracy:.6f}")
    lines.append(f"unrefined accuracy:  {report.unrefined_accuracy:.6f}")
    lines.append(f"s_dis:               {report.s_dis:.6f}")
    lines.append(f"s_div:               {s_div}")
    lines.append(f"degenerate samples:  {report.degenerate_count}")
    lines.append(f"covered total:       {report.covered_total}")
    lines.append("config fingerprint:  " + json.dumps(fingerprint, sort_keys=True))
    lines.append("")
    lines.append("machine form: " + json.dumps(d, sort_keys=True))
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    ckpt_path = Path(args.checkpoint)
    if not ckpt_path.exists():
        raise ValidationFailure(f"missing checkpoint {ckpt_path}")
    model, meta = load_checkpoint(ckpt_path)
    records, header = read_dataset(args.dataset)
    if not records:
        raise ValidationFailure(f"{args.dataset}: no records")
    d_v = records[0].features.shape[1]
    if d_v != model.dims.d_v:
        raise ValidationFailure(
            f"fingerprint mismatch: dataset d_v {d_v} != checkpoint d_v "
            f"{model.dims.d_v}")
    train_cfg = meta.get("extra", {}).get("config", {})
    eta = float(train_cfg.get("train.eta", 0.5))
    use_refinement = bool(train_cfg.get("train.regression", True))
    report, dump = evaluate(model, records, eta=eta,
                            use_refinement=use_refinement)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(
        _render_report(report, meta["fingerprint"]), encoding="utf-8")
    with open(out / "report.jsonl", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(report.as_dict(), sort_keys=True) + "\n")
    with open(out / "predictions.jsonl", "w", encoding="utf-8") as fh:
        for row in dump:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    print((out / "report.txt").read_text(encoding="utf-8"), end="")
    return 0


def cmd_ablate(args) -> int:
    cfg = _build_config(args, "train.seed")
    if args.seeds is not None:
        cfg = dataclasses.replace(cfg, ablate_seeds=args.seeds)
        cfg.validate()
    report = run_ablation(cfg, args.out, which=args.cells)
    failed = [c["name"] for c in report["cells"] if c["status"] != "ok"]
    print(Path(args.out, "report.txt").read_text(encoding="utf-8"), end="")
    if failed:
        print(f"cells failed: {', '.join(failed)}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groundbox",
        description="phrase-to-box grounding on synthetic scenes")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write train/val/test datasets + vocab")
    _add_common(g)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--overwrite", action="store_true")
    g.set_defaults(fn=cmd_generate)

    t = sub.add_parser("train", help="train a model on a generated dataset")
    _add_common(t)
    t.add_argument("--data", required=True, help="directory from `generate`")
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--variant", choices=("kld", "softmax_single_label"))
    t.add_argument("--no-regression", action="store_true")
    t.add_argument("--iterations", type=int)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset file")
    _add_common(e)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(fn=cmd_eval)

    a = sub.add_parser("ablate", help="run the loss/preset ablation grid")
    _add_common(a)
    a.add_argument("--out", required=True)
    a.add_argument("--cells", default="all",
                   help="table2 | table1 | all | comma list like high/kld+reg")
    a.add_argument("--seeds", type=int, help="seeds per cell")
    a.set_defaults(fn=cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValidationFailure) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (TrainAbort, GenerationError) as e:
        print(f"abort: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
