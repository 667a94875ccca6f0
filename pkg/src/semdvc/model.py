"""Full event captioning model: fusion -> encoder -> decoder -> heads."""

from dataclasses import dataclass, field

import torch
from torch import nn

from .heads import CaptionHead, ClassificationHead, EventCounter, LocalizationHead
from .pyramid import FeatureFusion, MultiScaleFeature, PositionalLevelEncoding
from .transformer import DeformableEncoder, EventDecoder


@dataclass
class ModelConfig:
    modality_dims: list[int]
    concept_dim: int  # 0 disables the concept stream
    num_labels: int
    vocab_size: int
    model_dim: int = 256
    levels: int = 3
    fusion_mode: str = "late"
    heads: int = 8
    points: int = 4
    encoder_layers: int = 2
    decoder_layers: int = 2
    num_queries: int = 35
    max_events: int = 10
    caption_max_len: int = 20
    word_dim: int = 128
    caption_hidden: int = 256

    def stream_dims(self) -> list[int]:
        dims = list(self.modality_dims)
        if self.concept_dim > 0:
            dims.append(self.concept_dim)
        return dims


@dataclass
class ModelOutputs:
    event_reps: torch.Tensor  # N x d
    references: torch.Tensor  # N
    localization: torch.Tensor  # N x 2 normalized [start, end]
    class_probs: torch.Tensor  # N x num_labels
    counter_logits: torch.Tensor  # max_events + 1
    encoded: MultiScaleFeature = field(repr=False, default=None)


class DVCModel(nn.Module):
    """Decode N event queries from fused multi-modal + concept features."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        num_levels = config.levels + 1
        self.fusion = FeatureFusion(
            config.stream_dims(), config.fusion_mode, config.model_dim, config.levels
        )
        self.positional = PositionalLevelEncoding(config.model_dim, num_levels)
        self.encoder = DeformableEncoder(
            config.model_dim, config.heads, num_levels, config.points,
            config.encoder_layers,
        )
        self.decoder = EventDecoder(
            config.model_dim, config.heads, num_levels, config.points,
            config.decoder_layers, config.num_queries,
        )
        self.localization_head = LocalizationHead(config.model_dim)
        self.classification_head = ClassificationHead(config.model_dim, config.num_labels)
        self.counter = EventCounter(config.model_dim, config.max_events)
        self.caption_head = CaptionHead(
            config.model_dim,
            config.vocab_size,
            word_dim=config.word_dim,
            hidden_dim=config.caption_hidden,
            max_len=config.caption_max_len,
        )

    def forward(
        self,
        modality_features: list[torch.Tensor],
        concept_sequence: torch.Tensor | None,
        valid: torch.Tensor,
    ) -> ModelOutputs:
        """modality_features: list of (T, d_m); concept_sequence: (T, N_c)
        or None when the concept stream is disabled; valid: (T,) bool."""
        streams = list(modality_features)
        if self.config.concept_dim > 0:
            if concept_sequence is None:
                raise ValueError("model expects a concept stream but got none")
            streams.append(concept_sequence)
        fused = self.fusion(streams, valid)
        x = fused.data + self.positional(fused.level_lengths)
        encoded = self.encoder(x, fused.level_lengths, fused.valid)
        reps, refs = self.decoder(encoded, fused.level_lengths, fused.valid)
        return ModelOutputs(
            event_reps=reps,
            references=refs,
            localization=self.localization_head(reps),
            class_probs=self.classification_head(reps),
            counter_logits=self.counter(reps),
            encoded=MultiScaleFeature(encoded, fused.level_lengths, fused.valid),
        )
