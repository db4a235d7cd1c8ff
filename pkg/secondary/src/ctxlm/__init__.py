"""Toy causal language model with entity memory attention.

Consumes the prompt bundle JSON Lines emitted by the retrieval
toolkit, trains a character-level completion model whose every layer
attends jointly to in-file context and encoded entity summaries, and
emits predictions in the evaluation harness's JSON Lines format.
"""

from .bundles import (Bundle, corpus_texts, encode_entity_body,
                      encode_for_completion, read_bundles, write_predictions)
from .decoding import greedy_complete
from .errors import (BundleError, CtxLmError, MissingSumToken, ShapeMismatch,
                     VocabularyMiss)
from .model import (ENTITY_STATE_SOURCES, POOLING_MODES, EntityAttentionLM,
                    ModelConfig, init_params, load_model, save_model)
from .training import TrainLog, build_vocabulary, train_on_bundles
from .vocab import SUM_MARKER, Vocabulary

__all__ = [
    "Bundle",
    "BundleError",
    "CtxLmError",
    "ENTITY_STATE_SOURCES",
    "EntityAttentionLM",
    "MissingSumToken",
    "ModelConfig",
    "POOLING_MODES",
    "ShapeMismatch",
    "SUM_MARKER",
    "TrainLog",
    "Vocabulary",
    "VocabularyMiss",
    "build_vocabulary",
    "corpus_texts",
    "encode_entity_body",
    "encode_for_completion",
    "greedy_complete",
    "init_params",
    "load_model",
    "read_bundles",
    "save_model",
    "train_on_bundles",
    "write_predictions",
]
