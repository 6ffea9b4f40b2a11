"""Deterministic evaluation pipeline for chain-of-thought VQA experiments.

Harmonizes three question-answering datasets into one schema, builds
two-stage prompts, extracts answers from model output, scores them with
normalization-aware metrics, and ships reference kernels for the fusion
and training arithmetic the experiments rely on.
"""

from .schema import UnifiedSample, normalize
from .okvqa import majority_vote
from .metrics import (
    MetricConfig,
    consensus_score,
    cosine_similarity,
    exact_match,
    numeric_accuracy,
    token_f1,
)
from .training import ScheduleConfig, effective_batch, lr_at, warmup_steps

__version__ = "0.1.0"

__all__ = [
    "MetricConfig",
    "ScheduleConfig",
    "UnifiedSample",
    "consensus_score",
    "cosine_similarity",
    "effective_batch",
    "exact_match",
    "lr_at",
    "majority_vote",
    "normalize",
    "numeric_accuracy",
    "token_f1",
    "warmup_steps",
    "__version__",
]
