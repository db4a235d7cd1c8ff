"""Causal transformer with entity memory attention.

A character-level language model at toy scale.  Retrieved cross-file
entities are each encoded to one vector by the same network, then every
in-file position attends jointly, at every layer, to the entity vectors
and to the causal in-file prefix.  Entity vectors are position-free
memory slots: keys and values for them come from the shared key/value
projections, sit ahead of the in-file keys, and are visible to every
query row, while the in-file block keeps its causal mask.

Everything is float64 numpy with hand-written backward passes, so
gradients can be checked against finite differences exactly.

Shape conventions: sequences are (T, d) row matrices, entity memory is
(n, d), attention weights are (T, n + T) with memory columns first.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import MissingSumToken, ShapeMismatch
from .vocab import Vocabulary

NORM_EPS = 1e-5
POOLING_MODES = ("sum_token", "mean_pool")
ENTITY_STATE_SOURCES = ("final", "per_layer")


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters; deliberately capped at toy scale."""

    vocab_size: int
    sum_token_id: int
    d_model: int = 48
    n_layers: int = 2
    block_size: int = 320
    mlp_mult: int = 4
    pooling: str = "sum_token"
    entity_states: str = "final"
    max_entities: int = 16
    entity_char_cap: int = 256
    init_std: float = 0.08
    seed: int = 0

    def __post_init__(self):
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"unknown pooling mode {self.pooling!r}")
        if self.entity_states not in ENTITY_STATE_SOURCES:
            raise ValueError(
                f"unknown entity state source {self.entity_states!r}")
        if not 1 <= self.n_layers <= 2:
            raise ValueError("n_layers must be 1 or 2")
        if not 1 <= self.d_model <= 64:
            raise ValueError("d_model must be between 1 and 64")
        if self.vocab_size < 4:
            raise ValueError("vocabulary must cover specials plus content")
        if not 0 <= self.sum_token_id < self.vocab_size:
            raise ValueError("sum_token_id outside the vocabulary")
        if self.block_size < 2:
            raise ValueError("block_size must be at least 2")
        if self.mlp_mult < 1:
            raise ValueError("mlp_mult must be positive")
        if self.max_entities < 0:
            raise ValueError("max_entities must be non-negative")
        if self.entity_char_cap < 1:
            raise ValueError("entity_char_cap must be positive")


def _rmsnorm(x: np.ndarray):
    """Row-wise RMS normalization; returns (normed, cache)."""
    ms = np.mean(x * x, axis=-1, keepdims=True)
    scale = 1.0 / np.sqrt(ms + NORM_EPS)
    return x * scale, (x, scale)


def _rmsnorm_backward(dout: np.ndarray, cache) -> np.ndarray:
    x, scale = cache
    d = x.shape[-1]
    dot = np.sum(dout * x, axis=-1, keepdims=True)
    return dout * scale - x * (scale ** 3) * dot / d


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    """Stable row softmax; -inf entries come out as exact zeros."""
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def _softmax_backward(weights: np.ndarray, dweights: np.ndarray) -> np.ndarray:
    inner = np.sum(dweights * weights, axis=-1, keepdims=True)
    return weights * (dweights - inner)


def _expected_shapes(config: ModelConfig) -> Dict[str, Tuple[int, int]]:
    d, hidden = config.d_model, config.d_model * config.mlp_mult
    shapes = {
        "wte": (config.vocab_size, d),
        "wpe": (config.block_size, d),
        "lm_head": (d, config.vocab_size),
    }
    for li in range(config.n_layers):
        shapes[f"layer{li}.wq"] = (d, d)
        shapes[f"layer{li}.wk"] = (d, d)
        shapes[f"layer{li}.wv"] = (d, d)
        shapes[f"layer{li}.wo"] = (d, d)
        shapes[f"layer{li}.w1"] = (d, hidden)
        shapes[f"layer{li}.w2"] = (hidden, d)
    return shapes


def init_params(config: ModelConfig) -> Dict[str, np.ndarray]:
    """Gaussian-initialized parameter set, deterministic per seed."""
    rng = np.random.default_rng(config.seed)
    return {name: rng.normal(0.0, config.init_std, size=shape)
            for name, shape in sorted(_expected_shapes(config).items())}


class EntityAttentionLM:
    """The model: shared encoder and completion weights.

    Entities are encoded independently by plain causal passes of this
    same network; completion passes fuse the resulting vectors into
    attention at every layer.
    """

    def __init__(self, config: ModelConfig,
                 params: Optional[Dict[str, np.ndarray]] = None):
        self.config = config
        self.params = params if params is not None else init_params(config)
        expected = _expected_shapes(config)
        if set(self.params) != set(expected):
            raise ShapeMismatch("parameter set does not match configuration")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ShapeMismatch(
                    f"{name} has shape {self.params[name].shape}, "
                    f"expected {shape}")

    # ---- forward building blocks ----

    def _attention_sublayer(self, li: int, x: np.ndarray,
                            mem: Optional[np.ndarray], want_attn: bool):
        p = self.params
        wq, wk, wv, wo = (p[f"layer{li}.wq"], p[f"layer{li}.wk"],
                          p[f"layer{li}.wv"], p[f"layer{li}.wo"])
        seq_len = x.shape[0]
        xa, norm_cache = _rmsnorm(x)
        q = xa @ wq
        k = xa @ wk
        v = xa @ wv
        if mem is not None and mem.shape[0]:
            ma, mem_norm_cache = _rmsnorm(mem)
            keys = np.concatenate([ma @ wk, k])
            vals = np.concatenate([ma @ wv, v])
            n_mem = mem.shape[0]
        else:
            ma, mem_norm_cache = None, None
            keys, vals = k, v
            n_mem = 0
        scale = 1.0 / np.sqrt(self.config.d_model)
        scores = (q @ keys.T) * scale
        scores[:, n_mem:][np.triu(np.ones((seq_len, seq_len), dtype=bool),
                                  k=1)] = -np.inf
        weights = _softmax_rows(scores)
        ctx = weights @ vals
        out = ctx @ wo
        cache = (x, norm_cache, xa, q, keys, vals, weights, ctx,
                 ma, mem_norm_cache, n_mem, scale)
        return x + out, (weights if want_attn else None), cache

    def _attention_backward(self, li: int, cache, dout: np.ndarray, grads):
        p = self.params
        wq, wk, wv, wo = (p[f"layer{li}.wq"], p[f"layer{li}.wk"],
                          p[f"layer{li}.wv"], p[f"layer{li}.wo"])
        (x, norm_cache, xa, q, keys, vals, weights, ctx,
         ma, mem_norm_cache, n_mem, scale) = cache
        grads[f"layer{li}.wo"] += ctx.T @ dout
        dctx = dout @ wo.T
        dweights = dctx @ vals.T
        dvals = weights.T @ dctx
        dscores = _softmax_backward(weights, dweights) * scale
        dq = dscores @ keys
        dkeys = dscores.T @ q
        dk, dv = dkeys[n_mem:], dvals[n_mem:]
        grads[f"layer{li}.wq"] += xa.T @ dq
        grads[f"layer{li}.wk"] += xa.T @ dk
        grads[f"layer{li}.wv"] += xa.T @ dv
        dxa = dq @ wq.T + dk @ wk.T + dv @ wv.T
        dmem = None
        if n_mem:
            dkm, dvm = dkeys[:n_mem], dvals[:n_mem]
            grads[f"layer{li}.wk"] += ma.T @ dkm
            grads[f"layer{li}.wv"] += ma.T @ dvm
            dma = dkm @ wk.T + dvm @ wv.T
            dmem = _rmsnorm_backward(dma, mem_norm_cache)
        dx = dout + _rmsnorm_backward(dxa, norm_cache)
        return dx, dmem

    def _mlp_sublayer(self, li: int, x: np.ndarray):
        p = self.params
        xm, norm_cache = _rmsnorm(x)
        pre = xm @ p[f"layer{li}.w1"]
        hidden = np.maximum(pre, 0.0)
        out = hidden @ p[f"layer{li}.w2"]
        return x + out, (norm_cache, xm, pre, hidden)

    def _mlp_backward(self, li: int, cache, dout: np.ndarray, grads):
        p = self.params
        norm_cache, xm, pre, hidden = cache
        grads[f"layer{li}.w2"] += hidden.T @ dout
        dhidden = dout @ p[f"layer{li}.w2"].T
        dpre = dhidden * (pre > 0.0)
        grads[f"layer{li}.w1"] += xm.T @ dpre
        dxm = dpre @ p[f"layer{li}.w1"].T
        return dout + _rmsnorm_backward(dxm, norm_cache)

    # ---- sequence passes ----

    def _check_ids(self, ids) -> np.ndarray:
        arr = np.asarray(ids, dtype=np.intp)
        if arr.ndim != 1 or arr.shape[0] == 0:
            raise ShapeMismatch("token sequence must be non-empty and flat")
        if arr.shape[0] > self.config.block_size:
            raise ShapeMismatch(
                f"sequence length {arr.shape[0]} exceeds block size "
                f"{self.config.block_size}")
        if arr.min() < 0 or arr.max() >= self.config.vocab_size:
            raise ShapeMismatch("token id outside the vocabulary")
        return arr

    def _seq_forward(self, ids, mem_layers=None, want_head=True,
                     want_attn=False):
        """One full pass; ``mem_layers`` is a per-layer (n, d) list."""
        arr = self._check_ids(ids)
        seq_len = arr.shape[0]
        x0 = self.params["wte"][arr] + self.params["wpe"][:seq_len]
        x, embed_norm_cache = _rmsnorm(x0)
        layer_inputs = [x]
        layer_caches = []
        attn_maps = []
        for li in range(self.config.n_layers):
            mem = mem_layers[li] if mem_layers is not None else None
            x, attn, att_cache = self._attention_sublayer(
                li, x, mem, want_attn)
            x, mlp_cache = self._mlp_sublayer(li, x)
            layer_caches.append((att_cache, mlp_cache))
            layer_inputs.append(x)
            attn_maps.append(attn)
        logits = x @ self.params["lm_head"] if want_head else None
        return {"ids": arr, "embed_norm": embed_norm_cache,
                "layer_inputs": layer_inputs, "layer_caches": layer_caches,
                "attn": attn_maps, "final": x, "logits": logits}

    def _seq_backward(self, cache, grads, dlogits=None, dfinal=None,
                      dlayer_inputs=None) -> List[Optional[np.ndarray]]:
        """Unwind one pass; returns per-layer gradients for the memory."""
        final = cache["final"]
        dx = np.zeros_like(final)
        if dlogits is not None:
            grads["lm_head"] += final.T @ dlogits
            dx += dlogits @ self.params["lm_head"].T
        if dfinal is not None:
            dx = dx + dfinal
        dmem_layers: List[Optional[np.ndarray]] = [None] * self.config.n_layers
        for li in reversed(range(self.config.n_layers)):
            att_cache, mlp_cache = cache["layer_caches"][li]
            dx = self._mlp_backward(li, mlp_cache, dx, grads)
            dx, dmem = self._attention_backward(li, att_cache, dx, grads)
            dmem_layers[li] = dmem
            if dlayer_inputs is not None and dlayer_inputs[li] is not None:
                dx = dx + dlayer_inputs[li]
        dx0 = _rmsnorm_backward(dx, cache["embed_norm"])
        np.add.at(grads["wte"], cache["ids"], dx0)
        grads["wpe"][:dx0.shape[0]] += dx0
        return dmem_layers

    # ---- entity encoding ----

    def _pool(self, states: np.ndarray, mode: str) -> np.ndarray:
        if mode == "sum_token":
            return states[-1]
        return states.mean(axis=0)

    def _unpool(self, vec: np.ndarray, seq_len: int, mode: str) -> np.ndarray:
        spread = np.zeros((seq_len, vec.shape[0]))
        if mode == "sum_token":
            spread[-1] = vec
        else:
            spread[:] = vec / seq_len
        return spread

    def _check_entity_sequences(self, sequences, mode: str):
        checked = []
        for i, seq in enumerate(sequences):
            arr = self._check_ids(seq)
            if mode == "sum_token" and arr[-1] != self.config.sum_token_id:
                raise MissingSumToken(i)
            checked.append(arr)
        return checked

    def encode_entities(self, sequences: Sequence[Sequence[int]],
                        mode: Optional[str] = None) -> np.ndarray:
        """One vector per entity: the final-layer summary states.

        ``sum_token`` reads the state at the trailing ``[SUM]`` position;
        ``mean_pool`` averages the final-layer states of every token.
        Returns an (n, d_model) matrix; n may be zero.
        """
        mode = mode or self.config.pooling
        if mode not in POOLING_MODES:
            raise ValueError(f"unknown pooling mode {mode!r}")
        checked = self._check_entity_sequences(sequences, mode)
        if not checked:
            return np.zeros((0, self.config.d_model))
        rows = []
        for arr in checked:
            cache = self._seq_forward(arr, want_head=False)
            rows.append(self._pool(cache["final"], mode))
        return np.stack(rows)

    def _encode_memory(self, entity_seqs):
        """Per-layer fusion inputs plus the caches to backprop through."""
        n_layers = self.config.n_layers
        mode = self.config.pooling
        checked = self._check_entity_sequences(entity_seqs, mode)
        if not checked:
            empty = np.zeros((0, self.config.d_model))
            return [empty] * n_layers, []
        caches = [self._seq_forward(arr, want_head=False) for arr in checked]
        if self.config.entity_states == "final":
            pooled = np.stack([self._pool(c["final"], mode) for c in caches])
            mem_layers = [pooled] * n_layers
        else:
            mem_layers = [
                np.stack([self._pool(c["layer_inputs"][li], mode)
                          for c in caches])
                for li in range(n_layers)
            ]
        return mem_layers, caches

    def _memory_backward(self, caches, dmem_layers, grads) -> None:
        if not caches:
            return
        mode = self.config.pooling
        if self.config.entity_states == "final":
            dpooled = sum(dmem_layers)
            for i, cache in enumerate(caches):
                seq_len = cache["final"].shape[0]
                dfinal = self._unpool(dpooled[i], seq_len, mode)
                self._seq_backward(cache, grads, dfinal=dfinal)
        else:
            for i, cache in enumerate(caches):
                seq_len = cache["final"].shape[0]
                inject = [self._unpool(dmem_layers[li][i], seq_len, mode)
                          for li in range(self.config.n_layers)]
                self._seq_backward(cache, grads, dlayer_inputs=inject)

    # ---- public completion surface ----

    def prepare_memory(self, entity_seqs) -> List[np.ndarray]:
        """Encode entities once for reuse across decode steps."""
        mem_layers, _ = self._encode_memory(entity_seqs)
        return mem_layers

    def logits_with_memory(self, ids, mem_layers) -> np.ndarray:
        return self._seq_forward(ids, mem_layers)["logits"]

    def logits_for(self, ids, entity_seqs=()) -> np.ndarray:
        """Next-token logits per position, memory encoded on the fly."""
        return self.logits_with_memory(ids, self.prepare_memory(entity_seqs))

    def trace_forward(self, ids, entity_seqs=()) -> dict:
        """Full pass with introspection: per-layer states and attention."""
        mem_layers, _ = self._encode_memory(entity_seqs)
        cache = self._seq_forward(ids, mem_layers, want_attn=True)
        return {"logits": cache["logits"],
                "layer_inputs": cache["layer_inputs"],
                "attention": cache["attn"],
                "memory": mem_layers}

    def layer_forward(self, layer_index: int, states,
                      entity_states: Optional[np.ndarray] = None,
                      return_weights: bool = False):
        """One fused layer applied to raw states; for probing and tests."""
        if not 0 <= layer_index < self.config.n_layers:
            raise ShapeMismatch(f"no layer {layer_index}")
        x = np.asarray(states, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.config.d_model:
            raise ShapeMismatch(
                f"states must be (T, {self.config.d_model}), got {x.shape}")
        mem = None
        if entity_states is not None:
            mem = np.asarray(entity_states, dtype=float)
            if mem.ndim != 2 or mem.shape[1] != self.config.d_model:
                raise ShapeMismatch(
                    f"entity states must be (n, {self.config.d_model}), "
                    f"got {mem.shape}")
        x, weights, _ = self._attention_sublayer(layer_index, x, mem,
                                                 want_attn=True)
        x, _ = self._mlp_sublayer(layer_index, x)
        return (x, weights) if return_weights else x

    def loss_from_logits(self, logits: np.ndarray, ids):
        """Mean next-token cross entropy; returns (loss, dlogits)."""
        arr = np.asarray(ids, dtype=np.intp)
        if arr.shape[0] < 2:
            raise ShapeMismatch("need at least two tokens to form a target")
        rows = logits[:-1]
        targets = arr[1:]
        shifted = rows - rows.max(axis=-1, keepdims=True)
        logsum = np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
        logprobs = shifted - logsum
        picked = logprobs[np.arange(targets.shape[0]), targets]
        loss = -picked.mean()
        dlogits = np.zeros_like(logits)
        probs = np.exp(logprobs)
        probs[np.arange(targets.shape[0]), targets] -= 1.0
        dlogits[:-1] = probs / targets.shape[0]
        return loss, dlogits

    def bundle_loss(self, ids, entity_seqs=()) -> float:
        """Forward-only loss for one completion stream."""
        mem_layers, _ = self._encode_memory(entity_seqs)
        cache = self._seq_forward(ids, mem_layers)
        loss, _ = self.loss_from_logits(cache["logits"], cache["ids"])
        return float(loss)

    def bundle_loss_and_grads(self, ids, entity_seqs=()):
        """Loss plus gradients for every parameter, entities included."""
        mem_layers, enc_caches = self._encode_memory(entity_seqs)
        cache = self._seq_forward(ids, mem_layers)
        loss, dlogits = self.loss_from_logits(cache["logits"], cache["ids"])
        grads = {name: np.zeros_like(value)
                 for name, value in self.params.items()}
        dmem_layers = self._seq_backward(cache, grads, dlogits=dlogits)
        self._memory_backward(enc_caches, dmem_layers, grads)
        return float(loss), grads


def save_model(path, model: EntityAttentionLM, vocab: Vocabulary) -> None:
    """Write parameters, configuration, and vocabulary atomically."""
    meta = json.dumps({"config": asdict(model.config),
                       "vocab": vocab.to_dict()}, sort_keys=True)
    arrays = dict(model.params)
    arrays["__meta__"] = np.frombuffer(meta.encode("utf-8"), dtype=np.uint8)
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target),
                               prefix=".ctxlm-", suffix=".npz")
    try:
        with os.fdopen(fd, "wb") as handle:
            np.savez(handle, **arrays)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def load_model(path) -> Tuple[EntityAttentionLM, Vocabulary]:
    with np.load(path) as archive:
        if "__meta__" not in archive:
            raise ShapeMismatch("checkpoint is missing its metadata record")
        meta = json.loads(bytes(archive["__meta__"].tobytes()).decode("utf-8"))
        params = {name: archive[name] for name in archive.files
                  if name != "__meta__"}
    config = ModelConfig(**meta["config"])
    vocab = Vocabulary.from_dict(meta["vocab"])
    return EntityAttentionLM(config, params=params), vocab
