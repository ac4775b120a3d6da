"""Tsetlin machine engine with soft clause-size budgets.

Vanilla and clause-size-constrained training, sequential and decentralized
parallel modes, dataset booleanization, compact model files, and clause
interpretability/energy reporting.
"""

from .core import (
    BooleanSample,
    Clause,
    ClauseBank,
    INFERENCE,
    TAState,
    TMModel,
    TRAINING,
    classify_binary,
    classify_multiclass,
    clause_size,
    evaluate_clause,
    literal_value,
    literals_from_features,
    ta_penalty,
    ta_reward,
    vote_sum,
)
from .feedback import (
    FeedbackParams,
    type_i_feedback,
    type_ii_feedback,
    update_probability,
)
from .trainer import (
    EpochMetrics,
    TrainConfig,
    VotingTally,
    evaluate,
    refresh_tally,
    settle_tally,
    split_dataset,
    train_parallel,
    train_sequential,
    update_clause_decentralized,
)

__version__ = "0.1.0"

__all__ = [
    "BooleanSample",
    "Clause",
    "ClauseBank",
    "EpochMetrics",
    "FeedbackParams",
    "INFERENCE",
    "TAState",
    "TMModel",
    "TRAINING",
    "TrainConfig",
    "VotingTally",
    "classify_binary",
    "classify_multiclass",
    "clause_size",
    "evaluate",
    "evaluate_clause",
    "literal_value",
    "literals_from_features",
    "refresh_tally",
    "settle_tally",
    "split_dataset",
    "ta_penalty",
    "ta_reward",
    "train_parallel",
    "train_sequential",
    "type_i_feedback",
    "type_ii_feedback",
    "update_clause_decentralized",
    "update_probability",
    "vote_sum",
]
