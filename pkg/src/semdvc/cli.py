"""Command line entry points tying the pipeline together.

Commands: make-synthetic, train-concepts, train, predict, evaluate.
Every command writes a config snapshot beside its outputs so a run can be
reproduced from the snapshot alone. Exit codes: 0 success, 1 user error,
2 internal error.
"""

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

import numpy as np
import torch

from .concepts import ConceptDetector, assign_concept_targets, build_concept_vocabulary, train_concept_detector
from .config import ConfigError, RunConfig, defaults_help
from .data import DatasetError, load_dataset
from .evaluation import evaluate_dvc, format_report_table
from .inference import predict_dataset, to_submission
from .losses import LossWeights
from .model import DVCModel, ModelConfig
from .synthetic import generate_synthetic_dataset, write_synthetic_dataset
from .text import build_text_vocabulary, tokenize
from .training import (
    load_concept_checkpoint,
    load_model_checkpoint,
    prepare_dataset,
    save_concept_checkpoint,
    save_model_checkpoint,
    train_model,
)

logger = logging.getLogger(__name__)


class UserError(Exception):
    """Invalid input, configuration, or file layout (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UserError(message)


def _parse_overrides(pairs):
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise UserError(f"--set expects KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def _load_config(args) -> RunConfig:
    overrides = _parse_overrides(getattr(args, "set", None))
    for flag, key in [
        ("seed", "seed"),
        ("epochs", "train.epochs"),
        ("lr", "train.lr"),
        ("fusion", "fusion.mode"),
        ("max_events", "counter.maxEvents"),
        ("queries", "queries.count"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "no_concepts", False):
        overrides["concepts.enabled"] = False
    try:
        return RunConfig.load(getattr(args, "config", None), overrides)
    except ConfigError as err:
        raise UserError(str(err)) from err


def _prepare_out_dir(out, force: bool) -> Path:
    out = Path(out)
    if out.exists() and any(out.iterdir()) and not force:
        raise UserError(f"output directory {out} is not empty (use --force)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _snapshot(out_dir: Path, cfg: RunConfig | None, command: str, extra: dict | None = None):
    """config.snapshot.json is a flat config file reloadable via --config;
    run_meta.json records the command and its arguments."""
    out_dir = Path(out_dir)
    if cfg is not None:
        cfg.snapshot(out_dir / "config.snapshot.json")
    meta = {"command": command}
    if extra:
        meta.update(extra)
    with open(out_dir / "run_meta.json", "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)


def _dataset_dir_file(manifest_path, name: str) -> Path | None:
    candidate = Path(manifest_path).parent / name
    return candidate if candidate.exists() else None


def _label_space_size(cfg: RunConfig, manifest_path) -> int:
    """Explicit labels.size wins; otherwise label_space.json beside the
    manifest. The resolved size is written back so config snapshots
    reproduce the run."""
    if not cfg.is_explicit("labels.size"):
        label_file = _dataset_dir_file(manifest_path, "label_space.json")
        if label_file is not None:
            with open(label_file) as f:
                size = len(json.load(f))
            logger.info("using label space of size %d from %s", size, label_file)
            cfg.update({"labels.size": size})
    return cfg["labels.size"]


def cmd_make_synthetic(args) -> int:
    out = _prepare_out_dir(args.out, args.force)
    records, lexicon, label_space = generate_synthetic_dataset(
        seed=args.seed if args.seed is not None else 42,
        num_videos=args.videos,
        max_events=args.max_events if args.max_events is not None else 5,
        feature_dim=args.feature_dim,
        modalities=args.modalities,
    )
    write_synthetic_dataset(out, records, lexicon, label_space)
    _snapshot(out, None, "make-synthetic", {
        "seed": args.seed if args.seed is not None else 42,
        "videos": args.videos,
        "max_events": args.max_events if args.max_events is not None else 5,
        "feature_dim": args.feature_dim,
        "modalities": args.modalities,
    })
    print(f"wrote {len(records)} videos to {out}")
    return 0


def cmd_train_concepts(args) -> int:
    cfg = _load_config(args)
    if cfg["concepts.epochs"] < 1:
        raise UserError("concepts.epochs must be >= 1")
    out = _prepare_out_dir(args.out, args.force)
    torch.manual_seed(cfg["seed"])
    label_size = _label_space_size(cfg, args.data)
    records = load_dataset(args.data, label_space_size=label_size)
    lexicon_path = args.pos_lexicon or _dataset_dir_file(args.data, "pos_lexicon.json")
    if lexicon_path is None:
        raise UserError("no POS lexicon: pass --pos-lexicon or put pos_lexicon.json beside the manifest")
    with open(lexicon_path) as f:
        lexicon = json.load(f)

    vocab = build_concept_vocabulary(records, lexicon, cfg["concepts.count"])
    modality = cfg["concepts.modality"]
    feats, targets, masks = [], [], []
    for rec in records:
        t, m = assign_concept_targets(rec, vocab, rec.fps)
        feats.append(rec.modality_features[modality])
        targets.append(t)
        masks.append(m)
    features = np.concatenate(feats, axis=0)
    detector = ConceptDetector(features.shape[1], len(vocab), cfg["concepts.hidden"])
    curve = train_concept_detector(
        detector,
        features,
        np.concatenate(targets, axis=0),
        np.concatenate(masks, axis=0),
        focal_gamma=cfg["focal.gamma"],
        focal_alpha=cfg["focal.alpha"],
        epochs=cfg["concepts.epochs"],
        learning_rate=cfg["concepts.lr"],
    )
    save_concept_checkpoint(out, detector, vocab, cfg.resolved())
    with open(out / "loss_curve.json", "w") as f:
        json.dump(curve, f)
    _snapshot(out, cfg, "train-concepts", {"data": str(args.data)})
    print(f"trained concept detector ({len(vocab)} concepts), final loss {curve[-1]:.6f}")
    return 0


def _build_model(cfg: RunConfig, modality_dims, concept_dim, num_labels, vocab_size) -> DVCModel:
    model_config = ModelConfig(
        modality_dims=list(modality_dims),
        concept_dim=concept_dim,
        num_labels=num_labels,
        vocab_size=vocab_size,
        model_dim=cfg["model.dim"],
        levels=cfg["pyramid.levels"],
        fusion_mode=cfg["fusion.mode"],
        heads=cfg["attention.heads"],
        points=cfg["attention.points"],
        encoder_layers=cfg["encoder.layers"],
        decoder_layers=cfg["decoder.layers"],
        num_queries=cfg["queries.count"],
        max_events=cfg["counter.maxEvents"],
        caption_max_len=cfg["caption.maxLen"],
        word_dim=cfg["caption.wordDim"],
        caption_hidden=cfg["caption.hiddenDim"],
    )
    return DVCModel(model_config)


def cmd_train(args) -> int:
    cfg = _load_config(args)
    if cfg["train.epochs"] < 1:
        raise UserError("train.epochs must be >= 1")
    out = _prepare_out_dir(args.out, args.force)
    label_size = _label_space_size(cfg, args.data)
    records = load_dataset(args.data, label_space_size=label_size)
    text_vocab = build_text_vocabulary(records, min_freq=cfg["vocab.minFreq"])

    detector, concept_vocab = None, None
    if cfg["concepts.enabled"]:
        if args.concepts is None:
            raise UserError("--concepts checkpoint required unless concepts are disabled")
        detector, concept_vocab = load_concept_checkpoint(args.concepts)

    prepared = prepare_dataset(
        records,
        detector,
        text_vocab,
        num_labels=label_size,
        resize_length=cfg["resize.length"],
        caption_max_len=cfg["caption.maxLen"],
        concept_modality=cfg["concepts.modality"],
    )
    torch.manual_seed(cfg["seed"])
    model = _build_model(
        cfg,
        [f.shape[1] for f in records[0].modality_features],
        len(concept_vocab) if concept_vocab is not None else 0,
        label_size,
        len(text_vocab),
    )
    weights = LossWeights(
        caption=cfg["loss.captionWeight"],
        localization=cfg["loss.locWeight"],
        classification=cfg["loss.clsWeight"],
        counter=cfg["loss.counterWeight"],
    )
    history = train_model(
        model,
        prepared,
        epochs=cfg["train.epochs"],
        learning_rate=cfg["train.lr"],
        seed=cfg["seed"],
        weights=weights,
        match_loc_weight=cfg["match.locWeight"],
        match_cls_weight=cfg["match.clsWeight"],
        focal_gamma=cfg["focal.gamma"],
        focal_alpha=cfg["focal.alpha"],
    )
    save_model_checkpoint(out, model, cfg.resolved(), text_vocab)
    if args.concepts is not None and cfg["concepts.enabled"]:
        shutil.copytree(args.concepts, out / "concepts", dirs_exist_ok=True)
    with open(out / "loss_history.json", "w") as f:
        json.dump(history, f, indent=2)
    _snapshot(out, cfg, "train", {"data": str(args.data)})
    print(f"trained model for {cfg['train.epochs']} epochs, final total loss {history[-1]['total']:.6f}")
    return 0


def cmd_predict(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model, text_vocab, ckpt_config = load_model_checkpoint(args.checkpoint)
    run_cfg = ckpt_config["run"]
    detector = None
    if model.config.concept_dim > 0:
        concepts_dir = Path(args.checkpoint) / "concepts"
        if not concepts_dir.exists():
            raise UserError(f"checkpoint has a concept stream but no concepts/ dir at {concepts_dir}")
        detector, _ = load_concept_checkpoint(concepts_dir)
    records = load_dataset(args.data, label_space_size=model.config.num_labels)
    prepared = prepare_dataset(
        records,
        detector,
        text_vocab,
        num_labels=model.config.num_labels,
        resize_length=run_cfg["resize.length"],
        caption_max_len=model.config.caption_max_len,
        concept_modality=run_cfg["concepts.modality"],
    )
    results = predict_dataset(model, prepared)
    submission = to_submission(results, text_vocab)
    with open(out, "w") as f:
        json.dump(submission, f, indent=2, sort_keys=True)
    _snapshot(out.parent, RunConfig(run_cfg), "predict", {
        "checkpoint": str(args.checkpoint),
        "data": str(args.data),
    })
    print(f"wrote predictions for {len(submission)} videos to {out}")
    return 0


def cmd_evaluate(args) -> int:
    with open(args.predictions) as f:
        predictions = json.load(f)
    with open(args.ground_truth) as f:
        manifest = json.load(f)
    results = {
        vid: [
            {"timestamp": p["timestamp"], "tokens": tokenize(p["sentence"])}
            for p in preds
        ]
        for vid, preds in predictions.items()
    }
    ground_truths = {
        vid: [
            {"timestamp": ts, "tokens": tokenize(sent)}
            for ts, sent in zip(entry["timestamps"], entry["sentences"])
        ]
        for vid, entry in manifest.items()
    }
    report = evaluate_dvc(results, ground_truths)
    table = format_report_table(report)
    print(table)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w") as f:
            json.dump(report.as_dict(), f, indent=2)
        _snapshot(out.parent, None, "evaluate", {
            "predictions": str(args.predictions),
            "ground_truth": str(args.ground_truth),
        })
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="semdvc",
        description="Dense video captioning with concept-assisted features and parallel decoding.",
        epilog="config defaults:\n" + defaults_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-synthetic", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--videos", type=int, default=20)
    p.add_argument("--max-events", dest="max_events", type=int, default=None)
    p.add_argument("--feature-dim", dest="feature_dim", type=int, default=32)
    p.add_argument("--modalities", type=int, default=2)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_make_synthetic)

    def common(p):
        p.add_argument("--config", default=None, help="flat JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--force", action="store_true")

    p = sub.add_parser("train-concepts", help="train the frame-level concept detector")
    common(p)
    p.add_argument("--data", required=True, help="manifest JSON path")
    p.add_argument("--out", required=True, help="detector checkpoint directory")
    p.add_argument("--pos-lexicon", dest="pos_lexicon", default=None)
    p.set_defaults(func=cmd_train_concepts)

    p = sub.add_parser("train", help="train the captioning model")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model checkpoint directory")
    p.add_argument("--concepts", default=None, help="concept detector checkpoint directory")
    p.add_argument("--no-concepts", dest="no_concepts", action="store_true",
                   help="disable the concept stream")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--fusion", choices=["early", "late"], default=None)
    p.add_argument("--max-events", dest="max_events", type=int, default=None)
    p.add_argument("--queries", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="decode events for a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="prediction JSON path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--predictions", required=True)
    p.add_argument("--ground-truth", dest="ground_truth", required=True,
                   help="dataset manifest JSON")
    p.add_argument("--out", default=None, help="report JSON path")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UserError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ConfigError, DatasetError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001 - single reporting point
        print(f"internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
