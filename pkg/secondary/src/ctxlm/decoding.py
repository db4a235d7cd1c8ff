"""Greedy completion of prompt bundles."""

from __future__ import annotations

import numpy as np

from .bundles import Bundle, encode_for_completion
from .model import EntityAttentionLM
from .vocab import Vocabulary


def greedy_complete(model: EntityAttentionLM, vocab: Vocabulary,
                    bundle: Bundle, max_new_tokens: int = 96) -> str:
    """Argmax continuation of the bundle's prefix until the end marker.

    The entity memory is encoded once and reused across steps.  Marker
    tokens other than the end marker are masked out of the argmax, and
    an overlong stream slides left so the cut point stays in view.
    """
    config = model.config
    ids, entity_seqs = encode_for_completion(
        vocab, bundle, config.block_size, config.max_entities,
        config.entity_char_cap, include_truth=False)
    memory = model.prepare_memory(entity_seqs)
    generated = []
    for _ in range(max_new_tokens):
        window = ids[-config.block_size:]
        logits = model.logits_with_memory(window, memory)[-1].copy()
        logits[vocab.bos_id] = -np.inf
        logits[vocab.sum_id] = -np.inf
        next_id = int(np.argmax(logits))
        if next_id == vocab.eos_id:
            break
        generated.append(next_id)
        ids.append(next_id)
    return vocab.decode(generated)
