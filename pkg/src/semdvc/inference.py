"""Confidence ranking and top-K event selection at inference time."""

import logging
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .text import EOS, PAD

logger = logging.getLogger(__name__)


@dataclass
class EventPrediction:
    start: float  # seconds
    end: float
    caption_tokens: list
    label_probs: np.ndarray
    confidence: float

    @property
    def labels(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.label_probs > 0.5)]


@dataclass
class DVCResult:
    video_id: str
    events: list[EventPrediction]  # confidence non-increasing, exactly K
    k: int
    counter_probs: np.ndarray


def caption_confidence(token_log_probs: np.ndarray, length: int) -> float:
    """exp(mean per-word log-probability) over the emitted tokens,
    including the end token."""
    length = max(int(length), 1)
    return float(np.exp(token_log_probs[:length].mean()))


def rank_and_select(
    video_id: str,
    loc_spans: np.ndarray,
    class_probs: np.ndarray,
    caption_tokens: np.ndarray,
    caption_log_probs: np.ndarray,
    caption_lengths: np.ndarray,
    counter_probs: np.ndarray,
    duration: float,
    padded_duration: float | None = None,
) -> DVCResult:
    """Rank the N query outputs by confidence and keep the counter's top K.

    Confidence is the classification confidence (max label probability)
    plus the captioning confidence (exponentiated mean token
    log-probability). Ties rank the lower query index first. Normalized
    spans denormalize against padded_duration (the timeline including any
    padding tail) and clamp into [0, duration].
    """
    n = loc_spans.shape[0]
    padded_duration = padded_duration or duration
    cls_conf = class_probs.max(axis=1) if class_probs.size else np.zeros(n)
    cap_conf = np.array(
        [
            caption_confidence(caption_log_probs[i], caption_lengths[i])
            for i in range(n)
        ]
    )
    confidence = cls_conf + cap_conf
    order = np.argsort(-confidence, kind="stable")

    k = int(np.argmax(counter_probs))
    if k > n:
        logger.warning(
            "video %s: counter predicts %d events but only %d queries; clamping",
            video_id, k, n,
        )
        k = n

    events = []
    for qi in order[:k]:
        start = float(np.clip(loc_spans[qi, 0] * padded_duration, 0.0, duration))
        end = float(np.clip(loc_spans[qi, 1] * padded_duration, 0.0, duration))
        toks = [
            int(t)
            for t in caption_tokens[qi, : caption_lengths[qi]]
            if t not in (PAD, EOS)
        ]
        events.append(
            EventPrediction(
                start=start,
                end=end,
                caption_tokens=toks,
                label_probs=class_probs[qi],
                confidence=float(confidence[qi]),
            )
        )
    return DVCResult(video_id=video_id, events=events, k=k, counter_probs=counter_probs)


@torch.no_grad()
def predict_video(model, video) -> DVCResult:
    """Run one prepared video through the model and select its event set."""
    model.eval()
    outputs = model(video.streams, video.concepts, video.valid)
    captions = model.caption_head.greedy(outputs.event_reps)
    counter_probs = F.softmax(outputs.counter_logits, dim=-1).numpy()
    return rank_and_select(
        video.id,
        outputs.localization.numpy(),
        outputs.class_probs.numpy(),
        captions.tokens.numpy(),
        captions.log_probs.numpy(),
        captions.lengths.numpy(),
        counter_probs,
        video.duration,
        video.padded_duration,
    )


def predict_dataset(model, prepared) -> list[DVCResult]:
    return [predict_video(model, video) for video in prepared]


def to_submission(results: list[DVCResult], vocab) -> dict:
    """Prediction JSON: {videoId: [{sentence, timestamp, labels, score}]}."""
    out = {}
    for res in results:
        out[res.video_id] = [
            {
                "sentence": " ".join(vocab.decode(ev.caption_tokens)),
                "timestamp": [ev.start, ev.end],
                "labels": ev.labels,
                "score": ev.confidence,
            }
            for ev in res.events
        ]
    return out
