"""Verifiable rewards, GRPO group math, completion parsing and evaluation
metrics for grounded multimodal named entity recognition."""

__version__ = "0.1.0"

from .core import (
    BBox,
    EntityTriple,
    EntityType,
    GmnerSample,
    OtherType,
    TaskMode,
    iou,
    parse_type,
    triple_correct,
)
from .grpo import (
    ClipConfig,
    FilterThresholds,
    GroupStats,
    clipped_surrogate,
    filter_group,
    group_advantages,
    group_stats,
)
from .matching import Matching, TokenF1, longest_contiguous_overlap, match_entities, token_f1, tokenize
from .metrics import (
    PRF,
    evaluate_corpus,
    metrics_report,
    no_target_accuracy,
    textual_bias_prf,
    vg_precision,
    visual_bias_stats,
)
from .parsing import (
    ParsedCompletion,
    PromptSpec,
    ReasoningStyle,
    parse_completion,
    render_prompt,
    serialize_answer,
)
from .rewards import (
    RewardBreakdown,
    RewardConfig,
    count_reward,
    entailment_reward,
    grounding_reward,
    score_completion,
    score_triples,
    span_reward,
    total_reward,
    type_reward,
)
