"""Training loop: Adam over per-bundle completion losses.

One optimizer step consumes one bundle, cycling the set in file order
so runs are reproducible without a shuffling policy.  The learning
rate decays linearly to zero across the requested step count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .bundles import Bundle, corpus_texts, encode_for_completion
from .errors import BundleError
from .model import EntityAttentionLM, ModelConfig
from .vocab import Vocabulary

ADAM_BETA1 = 0.85
ADAM_BETA2 = 0.99
ADAM_EPS = 1e-8


@dataclass
class TrainLog:
    """Per-step losses and windowed checkpoint means."""

    step_losses: List[float] = field(default_factory=list)
    checkpoints: List[Tuple[int, float]] = field(default_factory=list)


def build_vocabulary(bundles: Sequence[Bundle]) -> Vocabulary:
    """Character vocabulary covering every text these bundles carry."""
    return Vocabulary.from_texts(corpus_texts(bundles))


def train_on_bundles(bundles: Sequence[Bundle], config: ModelConfig,
                     vocab: Vocabulary, steps: int, lr: float = 0.01,
                     log_every: int = 0,
                     on_checkpoint: Optional[Callable[[int, float], None]]
                     = None) -> Tuple[EntityAttentionLM, TrainLog]:
    """Train a fresh model; returns it with the loss log.

    ``log_every`` of zero means one checkpoint per pass over the data.
    """
    trainable = [b for b in bundles if b.ground_truth is not None]
    if not trainable:
        raise BundleError("no bundle carries a ground truth to train on")
    if steps < 1:
        raise ValueError("steps must be positive")
    if log_every <= 0:
        log_every = len(trainable)
    encoded = [
        encode_for_completion(vocab, bundle, config.block_size,
                              config.max_entities, config.entity_char_cap,
                              include_truth=True)
        for bundle in trainable
    ]
    model = EntityAttentionLM(config)
    names = sorted(model.params)
    moment1 = {name: np.zeros_like(model.params[name]) for name in names}
    moment2 = {name: np.zeros_like(model.params[name]) for name in names}
    log = TrainLog()
    for step in range(steps):
        ids, entity_seqs = encoded[step % len(encoded)]
        loss, grads = model.bundle_loss_and_grads(ids, entity_seqs)
        log.step_losses.append(loss)
        lr_t = lr * (1.0 - step / steps)
        t = step + 1
        for name in names:
            g = grads[name]
            moment1[name] = ADAM_BETA1 * moment1[name] + (1 - ADAM_BETA1) * g
            moment2[name] = (ADAM_BETA2 * moment2[name]
                             + (1 - ADAM_BETA2) * g * g)
            m_hat = moment1[name] / (1 - ADAM_BETA1 ** t)
            v_hat = moment2[name] / (1 - ADAM_BETA2 ** t)
            model.params[name] -= lr_t * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        if t % log_every == 0:
            window = log.step_losses[-log_every:]
            mean_loss = float(np.mean(window))
            log.checkpoints.append((t, mean_loss))
            if on_checkpoint is not None:
                on_checkpoint(t, mean_loss)
    return model, log
