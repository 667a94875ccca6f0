"""Synthetic dataset generator.

Videos are built from a template grammar "apply <product> on <region> with
<tool>" over small word pools. Frames inside an event carry that event's
prototype vector (sum of per-word prototypes) plus Gaussian noise; other
frames carry a background prototype plus noise. The event label is the
region index, so the label space is the region pool. Everything is
deterministic given the seed.
"""

import json
from pathlib import Path

import numpy as np

from .data import GroundTruthEvent, TimeStamp, VideoRecord, write_dataset
from .text import tokenize

PRODUCTS = ["lipstick", "blush", "eyeliner", "foundation", "mascara", "powder", "concealer", "gloss"]
REGIONS = ["lips", "cheek", "eye", "face", "brow", "lash", "nose", "chin"]
TOOLS = ["brush", "sponge", "pencil", "hand", "wand", "puff"]
VERBS = ["apply"]

NOISE_SIGMA = 0.1
FPS = 1.0


def pos_lexicon() -> dict:
    """Word -> part-of-speech map covering the template grammar."""
    lex = {w: "noun" for w in PRODUCTS + REGIONS + TOOLS}
    lex.update({w: "verb" for w in VERBS})
    lex.update({"on": "other", "with": "other"})
    return lex


def _word_prototypes(rng: np.random.Generator, feature_dim: int, modalities: int):
    """Unit-norm prototype vector per (modality, word); plus background."""
    words = VERBS + PRODUCTS + REGIONS + TOOLS
    protos = []
    for _ in range(modalities):
        table = {}
        for w in words:
            v = rng.normal(size=feature_dim)
            table[w] = v / np.linalg.norm(v)
        bg = rng.normal(size=feature_dim)
        table["<background>"] = bg / np.linalg.norm(bg)
        protos.append(table)
    return protos


def generate_synthetic_dataset(
    seed: int,
    num_videos: int,
    max_events: int = 5,
    feature_dim: int = 32,
    modalities: int = 2,
):
    """Build `num_videos` records plus the POS lexicon and label space.

    Returns (records, pos_lexicon, label_space) where label_space is the
    ordered region list (event label = region index).
    """
    if max_events > 10:
        raise ValueError(f"max_events must be <= 10, got {max_events}")
    if max_events < 1:
        raise ValueError(f"max_events must be >= 1, got {max_events}")
    rng = np.random.default_rng(seed)
    protos = _word_prototypes(rng, feature_dim, modalities)

    records = []
    for v in range(num_videos):
        duration = float(rng.integers(60, 301))
        k = int(rng.integers(1, max_events + 1))
        slot = duration / k
        margin = 0.05 * slot
        events = []
        event_words = []
        for i in range(k):
            avail = slot - 2 * margin
            start = i * slot + margin + float(rng.uniform(0.0, 0.4)) * avail
            length = avail * (0.3 + 0.5 * float(rng.uniform()))
            end = min(start + length, (i + 1) * slot - margin)
            product = PRODUCTS[int(rng.integers(len(PRODUCTS)))]
            region = REGIONS[int(rng.integers(len(REGIONS)))]
            tool = TOOLS[int(rng.integers(len(TOOLS)))]
            caption = f"apply {product} on {region} with {tool}"
            events.append(
                GroundTruthEvent(
                    timestamp=TimeStamp(round(start, 3), round(end, 3)),
                    caption=tuple(tokenize(caption)),
                    labels=frozenset({REGIONS.index(region)}),
                )
            )
            event_words.append(("apply", product, region, tool))

        frames = int(round(duration * FPS))
        feats = []
        for m in range(modalities):
            table = protos[m]
            mat = np.empty((frames, feature_dim), dtype=np.float32)
            for t in range(frames):
                mid = (t + 0.5) / FPS
                base = table["<background>"]
                for ev, words in zip(events, event_words):
                    if ev.timestamp.start <= mid <= ev.timestamp.end:
                        base = sum(table[w] for w in words)
                        break
                mat[t] = base + rng.normal(scale=NOISE_SIGMA, size=feature_dim)
            feats.append(mat)

        records.append(
            VideoRecord(
                id=f"video_{v:03d}",
                duration=duration,
                modality_names=[f"mod{m}" for m in range(modalities)],
                modality_features=feats,
                events=events,
            )
        )
    return records, pos_lexicon(), list(REGIONS)


def write_synthetic_dataset(out_dir, records, lexicon, label_space) -> Path:
    """Write manifest + tensor files + pos_lexicon.json + label_space.json."""
    out_dir = Path(out_dir)
    manifest_path = write_dataset(records, out_dir)
    with open(out_dir / "pos_lexicon.json", "w") as f:
        json.dump(lexicon, f, indent=2, sort_keys=True)
    with open(out_dir / "label_space.json", "w") as f:
        json.dump(label_space, f, indent=2)
    return manifest_path
