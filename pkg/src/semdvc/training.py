"""Video preparation, the training loop, and checkpoint I/O.

The concept detector is trained offline and stays frozen here: concept
probabilities are precomputed per video before any model step, so model
training cannot touch detector parameters.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .concepts import ConceptDetector, detect_concepts
from .losses import (
    LossBreakdown,
    LossWeights,
    compute_losses,
    hungarian_match,
    matching_cost,
)
from .model import DVCModel
from .pyramid import resize_to_fixed_length
from .text import EOS, PAD, TextVocabulary

logger = logging.getLogger(__name__)


@dataclass
class PreparedVideo:
    id: str
    duration: float
    padded_duration: float  # timeline covered by all resized rows
    streams: list  # per-modality (T, d_m) float tensors
    concepts: torch.Tensor | None  # (T, N_c) or None
    valid: torch.Tensor  # (T,) bool
    gt_spans: torch.Tensor  # (G, 2) normalized to padded_duration
    gt_labels: torch.Tensor  # (G, num_labels) multi-hot
    gt_captions: torch.Tensor  # (G, S) token ids, EOS-terminated, PAD-filled
    events: list  # original GroundTruthEvent list


def encode_caption(tokens, vocab: TextVocabulary, max_len: int) -> list[int]:
    """Content tokens + EOS, truncated to max_len and PAD-filled."""
    ids = vocab.encode(list(tokens))[: max_len - 1] + [EOS]
    return ids + [PAD] * (max_len - len(ids))


def prepare_video(
    record,
    detector: ConceptDetector | None,
    vocab: TextVocabulary,
    num_labels: int,
    resize_length: int,
    caption_max_len: int,
    concept_modality: int = 0,
) -> PreparedVideo:
    streams = []
    valid_np = None
    for feat in record.modality_features:
        resized, valid_np = resize_to_fixed_length(feat, resize_length)
        streams.append(torch.from_numpy(resized))
    concepts = None
    if detector is not None:
        probs = detect_concepts(detector, record.modality_features[concept_modality])
        resized, _ = resize_to_fixed_length(probs, resize_length)
        concepts = torch.from_numpy(resized)
    valid_fraction = float(valid_np.sum()) / resize_length
    padded_duration = record.duration / valid_fraction
    g = len(record.events)
    spans = torch.zeros(g, 2)
    labels = torch.zeros(g, num_labels)
    captions = torch.full((g, caption_max_len), PAD, dtype=torch.long)
    for i, ev in enumerate(record.events):
        spans[i, 0] = ev.timestamp.start / padded_duration
        spans[i, 1] = ev.timestamp.end / padded_duration
        for l in ev.labels:
            labels[i, l] = 1.0
        captions[i] = torch.as_tensor(encode_caption(ev.caption, vocab, caption_max_len))
    return PreparedVideo(
        id=record.id,
        duration=record.duration,
        padded_duration=padded_duration,
        streams=streams,
        concepts=concepts,
        valid=torch.from_numpy(valid_np),
        gt_spans=spans,
        gt_labels=labels,
        gt_captions=captions,
        events=list(record.events),
    )


def prepare_dataset(records, detector, vocab, num_labels, resize_length,
                    caption_max_len, concept_modality: int = 0) -> list[PreparedVideo]:
    return [
        prepare_video(r, detector, vocab, num_labels, resize_length,
                      caption_max_len, concept_modality)
        for r in records
    ]


def training_step(
    model: DVCModel,
    video: PreparedVideo,
    weights: LossWeights,
    match_loc_weight: float = 2.0,
    match_cls_weight: float = 1.0,
    focal_gamma: float = 2.0,
    focal_alpha: float = 0.25,
) -> LossBreakdown:
    """Forward one video, match, and assemble the weighted loss."""
    outputs = model(video.streams, video.concepts, video.valid)
    g = video.gt_spans.shape[0]
    if g > 0:
        with torch.no_grad():
            cost = matching_cost(
                outputs.localization,
                outputs.class_probs,
                video.gt_spans,
                video.gt_labels,
                cost_loc=match_loc_weight,
                cost_cls=match_cls_weight,
                gamma=focal_gamma,
                alpha=focal_alpha,
            )
        match = hungarian_match(cost.numpy())
        q_idx = [q for q, _ in match.pairs]
        g_idx = [gt for _, gt in match.pairs]
        caption_targets = video.gt_captions[g_idx]
        caption_log_probs = model.caption_head.teacher_forcing(
            outputs.event_reps[q_idx], caption_targets
        )
    else:
        match = hungarian_match(np.zeros((model.config.num_queries, 0)))
        caption_targets = torch.zeros(0, model.config.caption_max_len, dtype=torch.long)
        caption_log_probs = torch.zeros(0, model.config.caption_max_len, model.config.vocab_size)
    try:
        return compute_losses(
            outputs.localization,
            outputs.class_probs,
            outputs.counter_logits,
            caption_log_probs,
            caption_targets,
            match,
            video.gt_spans,
            video.gt_labels,
            weights,
            model.config.max_events,
            gamma=focal_gamma,
            alpha=focal_alpha,
        )
    except FloatingPointError as err:
        raise FloatingPointError(f"video {video.id}: {err}") from err


def train_model(
    model: DVCModel,
    prepared: list[PreparedVideo],
    epochs: int,
    learning_rate: float = 1e-4,
    seed: int = 42,
    weights: LossWeights | None = None,
    match_loc_weight: float = 2.0,
    match_cls_weight: float = 1.0,
    focal_gamma: float = 2.0,
    focal_alpha: float = 0.25,
    log_every: int = 10,
) -> list[dict]:
    """Optimize the model on the prepared videos; deterministic given seed.

    One adaptive-moment step per video, shuffled per epoch from the seeded
    order. Returns the per-epoch mean loss breakdown.
    """
    weights = weights or LossWeights()
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=learning_rate)
    history = []
    for epoch in range(epochs):
        order = rng.permutation(len(prepared))
        sums = {"caption": 0.0, "localization": 0.0, "classification": 0.0,
                "counter": 0.0, "total": 0.0}
        for vi in order:
            optimizer.zero_grad()
            breakdown = training_step(
                model, prepared[vi], weights,
                match_loc_weight, match_cls_weight, focal_gamma, focal_alpha,
            )
            breakdown.total.backward()
            optimizer.step()
            for key, val in breakdown.detach_floats().items():
                sums[key] += val
        epoch_mean = {k: v / len(prepared) for k, v in sums.items()}
        history.append(epoch_mean)
        if log_every and (epoch + 1) % log_every == 0:
            logger.info(
                "epoch %d/%d total %.4f (cap %.4f loc %.4f cls %.4f cnt %.4f)",
                epoch + 1, epochs, epoch_mean["total"], epoch_mean["caption"],
                epoch_mean["localization"], epoch_mean["classification"],
                epoch_mean["counter"],
            )
    return history


def config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()
    ).hexdigest()[:16]


def save_checkpoint(out_dir, module: torch.nn.Module, config: dict) -> Path:
    """Write module parameters as tensor files plus a JSON manifest of
    shapes and the config hash."""
    from .tensorfile import write_tensor

    out_dir = Path(out_dir)
    params_dir = out_dir / "params"
    params_dir.mkdir(parents=True, exist_ok=True)
    entries = {}
    for i, (name, tensor) in enumerate(sorted(module.state_dict().items())):
        rel = f"params/{i:04d}.dvct"
        write_tensor(out_dir / rel, tensor.detach().cpu().float().numpy())
        entries[name] = {"file": rel, "shape": list(tensor.shape)}
    manifest = {
        "config": config,
        "config_hash": config_hash(config),
        "params": entries,
    }
    manifest_path = out_dir / "checkpoint.json"
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest_path


def load_checkpoint(ckpt_dir, module: torch.nn.Module) -> dict:
    """Load parameters saved by save_checkpoint; returns the stored config."""
    from .tensorfile import read_tensor

    ckpt_dir = Path(ckpt_dir)
    with open(ckpt_dir / "checkpoint.json") as f:
        manifest = json.load(f)
    state = {}
    for name, entry in manifest["params"].items():
        arr = read_tensor(ckpt_dir / entry["file"])
        if list(arr.shape) != entry["shape"]:
            raise ValueError(
                f"checkpoint {name}: file shape {list(arr.shape)} != "
                f"manifest shape {entry['shape']}"
            )
        state[name] = torch.from_numpy(arr)
    module.load_state_dict(state)
    return manifest["config"]


def save_concept_checkpoint(out_dir, detector: ConceptDetector, vocab, run_config: dict) -> Path:
    out_dir = Path(out_dir)
    config = {
        "kind": "concept_detector",
        "feature_dim": detector.feature_dim,
        "n_concepts": detector.n_concepts,
        "hidden": detector.net[0].out_features,
        "run": run_config,
    }
    path = save_checkpoint(out_dir, detector, config)
    vocab.save(out_dir / "concept_vocab.json")
    return path


def load_concept_checkpoint(ckpt_dir):
    from .concepts import ConceptVocabulary

    ckpt_dir = Path(ckpt_dir)
    with open(ckpt_dir / "checkpoint.json") as f:
        config = json.load(f)["config"]
    detector = ConceptDetector(
        config["feature_dim"], config["n_concepts"], config["hidden"]
    )
    load_checkpoint(ckpt_dir, detector)
    vocab = ConceptVocabulary.load(ckpt_dir / "concept_vocab.json")
    return detector, vocab


def save_model_checkpoint(out_dir, model: DVCModel, run_config: dict, text_vocab) -> Path:
    from dataclasses import asdict

    out_dir = Path(out_dir)
    config = {"kind": "dvc_model", "model": asdict(model.config), "run": run_config}
    path = save_checkpoint(out_dir, model, config)
    text_vocab.save(out_dir / "text_vocab.json")
    return path


def load_model_checkpoint(ckpt_dir):
    from .model import ModelConfig

    ckpt_dir = Path(ckpt_dir)
    with open(ckpt_dir / "checkpoint.json") as f:
        config = json.load(f)["config"]
    model = DVCModel(ModelConfig(**config["model"]))
    load_checkpoint(ckpt_dir, model)
    vocab = TextVocabulary.load(ckpt_dir / "text_vocab.json")
    return model, vocab, config
