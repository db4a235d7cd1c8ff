"""Prompt bundle JSON Lines input.

Each line is an object with a ``bundle_id``, an ``in_file_prefix``, a
list of ``entities`` (``{"locale", "body"}`` each), an optional
``ground_truth``, and free-form ``metadata``.  Only the fields this
model consumes are validated; everything else rides along untouched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .errors import BundleError, MissingSumToken
from .vocab import SUM_MARKER, Vocabulary


@dataclass(frozen=True)
class Bundle:
    bundle_id: str
    in_file_prefix: str
    entity_bodies: Tuple[str, ...]
    ground_truth: Optional[str] = None
    metadata: dict = field(default_factory=dict)


def read_bundles(path) -> List[Bundle]:
    """Read a bundle JSONL file, validating the consumed fields."""
    bundles: List[Bundle] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BundleError(f"invalid JSON: {exc.msg}",
                                  position=f"line {lineno}") from exc
            bundles.append(_bundle_from_dict(raw, where=f"line {lineno}"))
    return bundles


def _bundle_from_dict(raw: dict, where: str) -> Bundle:
    if not isinstance(raw, dict):
        raise BundleError("bundle must be a JSON object", position=where)
    for key in ("bundle_id", "in_file_prefix", "entities"):
        if key not in raw:
            raise BundleError(f"bundle is missing key {key!r}", position=where)
    if not isinstance(raw["in_file_prefix"], str):
        raise BundleError("in_file_prefix must be a string", position=where)
    if not isinstance(raw["entities"], list):
        raise BundleError("entities must be a list", position=where)
    bodies = []
    for i, ent in enumerate(raw["entities"]):
        if not isinstance(ent, dict) or "body" not in ent:
            raise BundleError(f"entity {i} needs a body", position=where)
        if not isinstance(ent["body"], str):
            raise BundleError(f"entity {i} body must be a string",
                              position=where)
        bodies.append(ent["body"])
    truth = raw.get("ground_truth")
    if truth is not None and not isinstance(truth, str):
        raise BundleError("ground_truth must be a string or null",
                          position=where)
    metadata = raw.get("metadata") or {}
    if not isinstance(metadata, dict):
        raise BundleError("metadata must be an object", position=where)
    return Bundle(bundle_id=str(raw["bundle_id"]),
                  in_file_prefix=raw["in_file_prefix"],
                  entity_bodies=tuple(bodies),
                  ground_truth=truth,
                  metadata=metadata)


def encode_entity_body(vocab: Vocabulary, body: str, index: int,
                       char_cap: int) -> List[int]:
    """Token ids for one entity body, terminator preserved.

    Bodies must carry the ``[SUM]`` terminator before any cropping; a
    body longer than ``char_cap`` tokens keeps its head (the locale
    marker and signature) and gets the terminator re-appended.
    """
    ids = vocab.encode(body, context=f"entity {index}")
    if not ids or ids[-1] != vocab.sum_id:
        raise MissingSumToken(index)
    if len(ids) > char_cap:
        ids = ids[:char_cap - 1] + [vocab.sum_id]
    return ids


def encode_for_completion(vocab: Vocabulary, bundle: Bundle, block_size: int,
                          max_entities: int, entity_char_cap: int,
                          include_truth: bool):
    """Token streams for one bundle: (in_file_ids, entity_id_sequences).

    The in-file stream is begin-marked, optionally carries the ground
    truth and end marker, and keeps its most recent ``block_size``
    tokens when overlong.  Entities keep the first ``max_entities``.
    """
    text = bundle.in_file_prefix
    ids = [vocab.bos_id] + vocab.encode(text, context=bundle.bundle_id)
    if include_truth:
        if bundle.ground_truth is None:
            raise BundleError(
                f"bundle {bundle.bundle_id} has no ground truth to train on")
        ids += vocab.encode(bundle.ground_truth, context=bundle.bundle_id)
        ids.append(vocab.eos_id)
    if len(ids) > block_size:
        ids = ids[-block_size:]
    cap = min(entity_char_cap, block_size)
    entity_ids = [
        encode_entity_body(vocab, body, i, cap)
        for i, body in enumerate(bundle.entity_bodies[:max_entities])
    ]
    return ids, entity_ids


def corpus_texts(bundles) -> List[str]:
    """Every text fragment a vocabulary must cover for these bundles."""
    texts: List[str] = []
    for bundle in bundles:
        texts.append(bundle.in_file_prefix)
        if bundle.ground_truth is not None:
            texts.append(bundle.ground_truth)
        texts.extend(bundle.entity_bodies)
    return texts


def write_predictions(path, rows) -> int:
    """Write ``{"bundle_id", "prediction"}`` JSON Lines; returns count."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for bundle_id, prediction in rows:
            handle.write(json.dumps(
                {"bundle_id": bundle_id, "prediction": prediction},
                sort_keys=True, ensure_ascii=False, separators=(",", ":")))
            handle.write("\n")
            count += 1
    return count


__all__ = ["Bundle", "read_bundles", "encode_entity_body",
           "encode_for_completion", "corpus_texts", "write_predictions",
           "SUM_MARKER"]
