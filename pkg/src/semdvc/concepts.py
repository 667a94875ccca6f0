"""Concept vocabulary, frame-level concept targets, and the concept detector.

Concepts are the highest-frequency nouns and verbs of the caption corpus.
Each frame inside an event gets a binary target vector marking which
concepts occur in the event's caption; frames outside every event are
masked out of detector training. The detector itself is a small MLP over
frame features, trained offline with focal loss and frozen afterwards.
"""

import json
from collections import Counter

import numpy as np
import torch
from torch import nn

from .losses import focal_loss


class ConceptVocabulary:
    """Ordered list of concept words with a word -> index map."""

    def __init__(self, concepts: list[str]):
        if len(set(concepts)) != len(concepts):
            raise ValueError("duplicate concept words")
        self.concepts = list(concepts)
        self.index = {w: i for i, w in enumerate(self.concepts)}

    def __len__(self) -> int:
        return len(self.concepts)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.concepts, f, indent=0)

    @classmethod
    def load(cls, path) -> "ConceptVocabulary":
        with open(path) as f:
            return cls(json.load(f))


def build_concept_vocabulary(records, pos_lexicon: dict, n_concepts: int) -> ConceptVocabulary:
    """Pick the n_concepts highest-frequency nouns/verbs of the corpus.

    Ties break lexicographically; the result is deterministic and
    independent of record order.
    """
    counts = Counter()
    for record in records:
        for event in record.events:
            counts.update(event.caption)
    eligible = {
        w: c for w, c in counts.items() if pos_lexicon.get(w) in ("noun", "verb")
    }
    if len(eligible) < n_concepts:
        raise ValueError(
            f"need {n_concepts} concepts but corpus has only "
            f"{len(eligible)} distinct nouns/verbs"
        )
    ordered = sorted(eligible.items(), key=lambda kv: (-kv[1], kv[0]))
    return ConceptVocabulary([w for w, _ in ordered[:n_concepts]])


def assign_concept_targets(record, vocab: ConceptVocabulary, fps: float):
    """Per-frame binary concept targets plus the caption mask.

    Frame t covers [t/fps, (t+1)/fps); it is inside an event when its
    midpoint lies in the event interval. Frames inside several events take
    the union of the captions' concepts. Frames inside no event get
    mask False and an all-zero target.
    """
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    frames = record.frame_count
    targets = np.zeros((frames, len(vocab)), dtype=np.float32)
    mask = np.zeros(frames, dtype=bool)
    event_concepts = []
    for ev in record.events:
        idx = sorted({vocab.index[w] for w in ev.caption if w in vocab.index})
        event_concepts.append((ev.timestamp.start, ev.timestamp.end, idx))
    for t in range(frames):
        mid = (t + 0.5) / fps
        for start, end, idx in event_concepts:
            if start <= mid <= end:
                mask[t] = True
                targets[t, idx] = 1.0
    return targets, mask


class ConceptDetector(nn.Module):
    """MLP mapping one frame feature to concept logits."""

    def __init__(self, feature_dim: int, n_concepts: int, hidden: int = 256):
        super().__init__()
        self.feature_dim = feature_dim
        self.n_concepts = n_concepts
        self.net = nn.Sequential(
            nn.Linear(feature_dim, hidden),
            nn.ReLU(),
            nn.Linear(hidden, n_concepts),
        )

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        if frames.shape[-1] != self.feature_dim:
            raise ValueError(
                f"feature dimension {frames.shape[-1]} does not match "
                f"detector input {self.feature_dim}"
            )
        return self.net(frames)


def train_concept_detector(
    detector: ConceptDetector,
    frame_features: np.ndarray,
    targets: np.ndarray,
    mask: np.ndarray,
    focal_gamma: float = 2.0,
    focal_alpha: float = 0.25,
    epochs: int = 50,
    learning_rate: float = 1e-3,
    batch_size: int = 256,
    seed: int = 0,
) -> list[float]:
    """Fit the detector on masked frames with minibatch focal loss descent.

    Deterministic given the seed. Returns the per-epoch mean loss curve.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.sum() == 0:
        raise ValueError("no masked (in-event) frames to train on")
    x = torch.as_tensor(frame_features[mask], dtype=torch.float32)
    y = torch.as_tensor(targets[mask], dtype=torch.float32)
    optimizer = torch.optim.Adam(detector.parameters(), lr=learning_rate)
    rng = np.random.default_rng(seed)
    curve = []
    for _ in range(epochs):
        order = rng.permutation(x.shape[0])
        epoch_loss, batches = 0.0, 0
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            optimizer.zero_grad()
            probs = torch.sigmoid(detector(x[idx]))
            loss = focal_loss(probs, y[idx], gamma=focal_gamma, alpha=focal_alpha)
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item()
            batches += 1
        curve.append(epoch_loss / batches)
    return curve


@torch.no_grad()
def detect_concepts(detector: ConceptDetector, frame_features) -> np.ndarray:
    """Sigmoid concept probabilities for every frame (event or not)."""
    x = torch.as_tensor(np.asarray(frame_features), dtype=torch.float32)
    return torch.sigmoid(detector(x)).numpy()
