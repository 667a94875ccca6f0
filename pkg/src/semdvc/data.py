"""Dataset schema and manifest I/O.

A dataset is a manifest JSON mapping video id ->
{duration, timestamps: [[s, e], ...], sentences: [...], labels: [[...], ...],
 features: {modalityName: tensorFilePath}} plus one tensor file per modality.
Feature paths are resolved relative to the manifest's directory.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensorfile import read_tensor, write_tensor
from .text import tokenize


class DatasetError(ValueError):
    """Raised on manifest or record validation failures."""


@dataclass(frozen=True)
class TimeStamp:
    start: float
    end: float

    def __post_init__(self):
        if self.start < 0 or self.end < 0:
            raise DatasetError(f"negative timestamp [{self.start}, {self.end}]")
        if self.start > self.end:
            raise DatasetError(f"timestamp start {self.start} > end {self.end}")

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class GroundTruthEvent:
    timestamp: TimeStamp
    caption: tuple  # token sequence
    labels: frozenset  # label indices

    def __post_init__(self):
        if not self.caption:
            raise DatasetError("empty caption")
        if any(l < 0 for l in self.labels):
            raise DatasetError(f"negative label index in {sorted(self.labels)}")


@dataclass
class VideoRecord:
    id: str
    duration: float
    modality_names: list[str]
    modality_features: list[np.ndarray]  # each T_raw x d_m
    events: list[GroundTruthEvent] = field(default_factory=list)

    def __post_init__(self):
        if self.duration <= 0:
            raise DatasetError(f"video {self.id}: duration must be positive")
        if not self.modality_features:
            raise DatasetError(f"video {self.id}: no modalities")
        frame_counts = {feat.shape[0] for feat in self.modality_features}
        if len(frame_counts) != 1:
            raise DatasetError(
                f"video {self.id}: modality frame counts differ: "
                f"{[f.shape[0] for f in self.modality_features]}"
            )
        for name, feat in zip(self.modality_names, self.modality_features):
            if feat.ndim != 2 or feat.shape[1] == 0:
                raise DatasetError(f"video {self.id}: modality {name} is not T x d")
        for k, ev in enumerate(self.events):
            if ev.timestamp.end > self.duration + 1e-6:
                raise DatasetError(
                    f"video {self.id}: event {k} ends at {ev.timestamp.end} "
                    f"beyond duration {self.duration}"
                )

    @property
    def frame_count(self) -> int:
        return self.modality_features[0].shape[0]

    @property
    def fps(self) -> float:
        return self.frame_count / self.duration


def _parse_event(video_id: str, index: int, ts, sentence, labels, label_space_size):
    start, end = float(ts[0]), float(ts[1])
    if start > end:
        raise DatasetError(
            f"video {video_id}: event {index} has start {start} > end {end}"
        )
    label_set = frozenset(int(l) for l in labels)
    if label_space_size is not None:
        bad = [l for l in label_set if l >= label_space_size]
        if bad:
            raise DatasetError(
                f"video {video_id}: event {index} labels {bad} outside "
                f"label space of size {label_space_size}"
            )
    try:
        return GroundTruthEvent(
            timestamp=TimeStamp(start, end),
            caption=tuple(tokenize(sentence)),
            labels=label_set,
        )
    except DatasetError as err:
        raise DatasetError(f"video {video_id}: event {index}: {err}") from err


def load_dataset(manifest_path, label_space_size: int | None = None) -> list[VideoRecord]:
    """Load and validate all video records named in a manifest.

    Events come back sorted by start time and captions tokenized.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path) as f:
        manifest = json.load(f)
    base = manifest_path.parent
    records = []
    for video_id in sorted(manifest):
        entry = manifest[video_id]
        duration = float(entry["duration"])
        timestamps = entry["timestamps"]
        sentences = entry["sentences"]
        labels = entry.get("labels", [[] for _ in sentences])
        if not (len(timestamps) == len(sentences) == len(labels)):
            raise DatasetError(
                f"video {video_id}: {len(timestamps)} timestamps, "
                f"{len(sentences)} sentences, {len(labels)} label lists"
            )
        events = [
            _parse_event(video_id, k, ts, sent, lab, label_space_size)
            for k, (ts, sent, lab) in enumerate(zip(timestamps, sentences, labels))
        ]
        events.sort(key=lambda ev: (ev.timestamp.start, ev.timestamp.end))
        names = sorted(entry["features"])
        features = []
        for name in names:
            path = base / entry["features"][name]
            if not path.exists():
                raise DatasetError(f"video {video_id}: missing feature file {path}")
            features.append(read_tensor(path))
        records.append(
            VideoRecord(
                id=video_id,
                duration=duration,
                modality_names=names,
                modality_features=features,
                events=events,
            )
        )
    return records


def write_dataset(records: list[VideoRecord], out_dir) -> Path:
    """Write records as manifest.json plus per-modality tensor files.

    Returns the manifest path. Layout: <out_dir>/manifest.json and
    <out_dir>/features/<video>__<modality>.dvct.
    """
    out_dir = Path(out_dir)
    feat_dir = out_dir / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for rec in records:
        feature_map = {}
        for name, feat in zip(rec.modality_names, rec.modality_features):
            rel = f"features/{rec.id}__{name}.dvct"
            write_tensor(out_dir / rel, feat)
            feature_map[name] = rel
        manifest[rec.id] = {
            "duration": rec.duration,
            "timestamps": [[ev.timestamp.start, ev.timestamp.end] for ev in rec.events],
            "sentences": [" ".join(ev.caption) for ev in rec.events],
            "labels": [sorted(ev.labels) for ev in rec.events],
            "features": feature_map,
        }
    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest_path
