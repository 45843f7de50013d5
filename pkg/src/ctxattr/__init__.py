"""Context attribution for language model responses.

Fits a sparse linear surrogate over random context ablations; the surrogate's
weights score each context source's contribution to a selected statement.
"""

from .ablation import (
    AblationSample,
    AblationVector,
    ablate,
    render_prompt,
    restrict,
    sample_ablations,
)
from .applications import (
    PoisonFlagReport,
    PruneResult,
    VerificationResult,
    detect_poison,
    prune_and_regenerate,
    verify_statement,
)
from .metrics import (
    EvalReport,
    evaluate_method,
    lds,
    leave_one_out,
    relevant_source_count,
    shap_kernel_weight,
    spearman,
    top_k_drop,
)
from .providers import (
    CannedScoreOracle,
    InteractionOracle,
    PlantedLinearOracle,
    Prompt,
    RemoteConfig,
    RemoteProvider,
    ScoredContinuation,
    ScoredGenerationProvider,
    make_planted_case,
    make_poison_case,
)
from .segmentation import (
    Granularity,
    SourceGroup,
    SourcePartition,
    SourceSpan,
    StatementSpan,
    segment_sentences,
    segment_words,
    select_statement,
    token_spans,
    whole_response_statement,
)
from .surrogate import (
    AttributionResult,
    SurrogateDataset,
    attribute,
    collect_dataset,
    lasso_fit,
    lasso_objective,
    logit_of_log_prob,
    top_k,
)

__version__ = "0.1.0"

__all__ = [
    "AblationSample",
    "AblationVector",
    "AttributionResult",
    "CannedScoreOracle",
    "EvalReport",
    "Granularity",
    "InteractionOracle",
    "PlantedLinearOracle",
    "PoisonFlagReport",
    "Prompt",
    "PruneResult",
    "RemoteConfig",
    "RemoteProvider",
    "ScoredContinuation",
    "ScoredGenerationProvider",
    "SourceGroup",
    "SourcePartition",
    "SourceSpan",
    "StatementSpan",
    "SurrogateDataset",
    "VerificationResult",
    "ablate",
    "attribute",
    "collect_dataset",
    "detect_poison",
    "evaluate_method",
    "lasso_fit",
    "lasso_objective",
    "lds",
    "leave_one_out",
    "logit_of_log_prob",
    "make_planted_case",
    "make_poison_case",
    "prune_and_regenerate",
    "relevant_source_count",
    "render_prompt",
    "restrict",
    "sample_ablations",
    "segment_sentences",
    "segment_words",
    "select_statement",
    "shap_kernel_weight",
    "spearman",
    "token_spans",
    "top_k",
    "top_k_drop",
    "verify_statement",
    "whole_response_statement",
]
