"""Dense video captioning with concept-assisted multi-modal encoding and
parallel event-query decoding."""

__version__ = "0.1.0"

from .data import GroundTruthEvent, TimeStamp, VideoRecord, load_dataset
from .evaluation import EvalReport, evaluate_dvc
from .inference import DVCResult, EventPrediction
from .losses import LossBreakdown, LossWeights, MatchResult
from .model import DVCModel, ModelConfig
from .text import TextVocabulary, build_text_vocabulary

__all__ = [
    "DVCModel",
    "DVCResult",
    "EvalReport",
    "EventPrediction",
    "GroundTruthEvent",
    "LossBreakdown",
    "LossWeights",
    "MatchResult",
    "ModelConfig",
    "TextVocabulary",
    "TimeStamp",
    "VideoRecord",
    "build_text_vocabulary",
    "evaluate_dvc",
    "load_dataset",
]
