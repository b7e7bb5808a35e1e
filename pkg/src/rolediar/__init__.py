"""Role-informed speaker diarization toolkit.

Builds per-speaker acoustic profiles from role-classified text segments
(role-specific n-gram language models, confidence-gated averaging) and
assigns audio windows to speakers by PLDA classification, alongside the
audio-only clustering and language-only baselines and a DER scorer.
"""

__version__ = "0.1.0"

from .core import (
    RoleLabel,
    TextSegment,
    TimeInterval,
    TimedWord,
    make_role_labels,
    merge_adjacent,
    normalize_token,
)
from .diarize import (
    DiarizationHypothesis,
    PipelineConfig,
    SessionData,
    SpeakerProfile,
    classify_windows,
    estimate_profiles,
    hac_cluster,
    run_pipeline,
    top_confidence_threshold,
)
from .der import DerReport, der_curve, pooled_report, score_der
from .embed import AudioWindow, NormalizationChain, normalize, uniform_windows
from .lm import Corpus, InterpolationWeights, NGramModel, interpolate, optimize_weights, perplexity, train
from .plda import PldaModel, adapt, score, train_plda
from .roles import RoleAssignment, assign_role, language_only_diarize
from .segmenter import SegmentationStrategy, oracle_split, presegment, sentence_split
from .synth import SyntheticSessionSpec, corrupt_transcript, generate

__all__ = [
    "AudioWindow",
    "Corpus",
    "DerReport",
    "DiarizationHypothesis",
    "InterpolationWeights",
    "NGramModel",
    "NormalizationChain",
    "PipelineConfig",
    "PldaModel",
    "RoleAssignment",
    "RoleLabel",
    "SegmentationStrategy",
    "SessionData",
    "SpeakerProfile",
    "SyntheticSessionSpec",
    "TextSegment",
    "TimeInterval",
    "TimedWord",
    "adapt",
    "assign_role",
    "classify_windows",
    "corrupt_transcript",
    "der_curve",
    "estimate_profiles",
    "generate",
    "hac_cluster",
    "interpolate",
    "language_only_diarize",
    "make_role_labels",
    "merge_adjacent",
    "normalize",
    "normalize_token",
    "optimize_weights",
    "perplexity",
    "pooled_report",
    "presegment",
    "run_pipeline",
    "score",
    "score_der",
    "sentence_split",
    "oracle_split",
    "top_confidence_threshold",
    "train",
    "train_plda",
    "uniform_windows",
]
