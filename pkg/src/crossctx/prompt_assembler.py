"""Render retrieved entities into budgeted prompt bundles.

Every entity is rendered as a locale comment line, the entity text, and
a literal ``[SUM]`` terminator; the whole block must fit the per-entity
token budget.  Truncation drops whole lines first and only then cuts
tokens inside a line, so the surviving text stays readable.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import BudgetTooSmall, FormatError
from .lexing import (SUM_TOKEN, TokenizerProfile, code_token_spans,
                     find_header_colon, get_tokenizer)
from .source_parser import EntityKind, ProjectEntity

DEFAULT_MAX_ENTITIES = 128
DEFAULT_MAX_ENTITY_TOKENS = 128

_DEF_LINE_RE = re.compile(r"^[ \t]*(?:async[ \t]+def|def|class)\b", re.MULTILINE)


@dataclass(frozen=True)
class BundleEntity:
    locale: str
    body: str


@dataclass(frozen=True)
class PromptBundle:
    bundle_id: str
    in_file_prefix: str
    entities: Tuple[BundleEntity, ...]
    ground_truth: Optional[str] = None
    metadata: Dict = field(default_factory=dict)


def _signature_only(entity: ProjectEntity) -> str:
    """Prototype form of an entity: def/class header, or just the name."""
    if entity.kind in (EntityKind.FUNCTION, EntityKind.CLASS):
        match = _DEF_LINE_RE.search(entity.text)
        if match:
            start = match.start()
            colon = find_header_colon(entity.text, start)
            if colon >= 0:
                return entity.text[start:colon + 1].strip()
        return entity.text.split("\n", 1)[0].strip()
    if entity.kind is EntityKind.GLOBAL_VAR:
        return entity.name
    return entity.text.split("\n", 1)[0].strip()


def _truncate_to_tokens(text: str, limit: int,
                        profile: TokenizerProfile) -> str:
    """Longest prefix of ``text`` holding at most ``limit`` tokens,
    preferring whole lines."""
    if limit <= 0:
        return ""
    lines = text.split("\n")
    counts = [profile.count(line) for line in lines]

    kept: List[str] = []
    used = 0
    index = 0
    while index < len(lines) and used + counts[index] <= limit:
        kept.append(lines[index])
        used += counts[index]
        index += 1
    if index < len(lines) and limit - used > 0:
        # Partial line: cut at a token boundary of the original text.
        room = limit - used
        spans = code_token_spans(lines[index])
        if spans:
            partial = lines[index][:spans[min(room, len(spans)) - 1][1]]
            if partial:
                kept.append(partial)
    result = "\n".join(kept)
    # The line arithmetic is exact for this tokenizer, but recount anyway
    # so the budget law holds unconditionally.
    while kept and profile.count(result) > limit:
        kept.pop()
        result = "\n".join(kept)
    return result


def assemble_entity_text(entity: ProjectEntity, budget: int,
                         tokenizer: str = "code",
                         simplified: bool = False) -> str:
    """Budgeted prompt block for one entity.

    Raises BudgetTooSmall when the locale comment and terminator leave
    no room for any content.
    """
    profile = get_tokenizer(tokenizer)
    comment = f"#{entity.locale}\n"
    fixed = profile.count(comment) + 1  # comment plus [SUM]
    if budget <= fixed:
        raise BudgetTooSmall(
            f"budget {budget} cannot fit entity {entity.locale!r}: "
            f"comment and terminator already take {fixed} tokens")

    text = _signature_only(entity) if simplified else entity.text
    body = _truncate_to_tokens(text.rstrip("\n"), budget - fixed, profile)
    rendered = f"{comment}{body}\n{SUM_TOKEN}" if body else f"{comment}{SUM_TOKEN}"
    while profile.count(rendered) > budget:
        body = body.rsplit("\n", 1)[0] if "\n" in body else ""
        rendered = f"{comment}{body}\n{SUM_TOKEN}" if body else f"{comment}{SUM_TOKEN}"
    return rendered


def assemble_bundle(graph, ctx, in_file_prefix: str, *,
                    ground_truth: Optional[str] = None,
                    bundle_id: Optional[str] = None,
                    max_entities: int = DEFAULT_MAX_ENTITIES,
                    max_entity_tokens: int = DEFAULT_MAX_ENTITY_TOKENS,
                    tokenizer: str = "code",
                    simplified: bool = False,
                    metadata: Optional[Dict] = None) -> PromptBundle:
    """Render a retrieved context into a prompt bundle.

    Keeps the first ``max_entities`` entities in retrieval order and
    notes how many were dropped; per-entity raw token counts are
    recorded before any truncation so usage stats stay honest.
    """
    profile = get_tokenizer(tokenizer)
    ids = list(ctx.entities)
    kept_ids = ids[:max_entities]

    rendered = []
    for node_id in kept_ids:
        entity = graph.entity(node_id)
        rendered.append(BundleEntity(
            locale=entity.locale,
            body=assemble_entity_text(entity, max_entity_tokens,
                                      tokenizer, simplified)))

    if bundle_id is None:
        digest = hashlib.sha1(in_file_prefix.encode("utf-8")).hexdigest()
        bundle_id = f"bundle-{digest[:12]}"

    meta = {
        "project": getattr(graph, "project_root", ""),
        "k": ctx.k,
        "retrieved_entity_count": len(ids),
        "dropped_entities": len(ids) - len(kept_ids),
        "entity_token_counts": [profile.count(graph.entity(i).text)
                                for i in ids],
        "missing_imports": len(ctx.missing),
        "tokenizer": tokenizer,
        "simplified": simplified,
    }
    if metadata:
        meta.update(metadata)

    return PromptBundle(
        bundle_id=bundle_id,
        in_file_prefix=in_file_prefix,
        entities=tuple(rendered),
        ground_truth=ground_truth,
        metadata=meta)


def bundle_to_dict(bundle: PromptBundle) -> dict:
    return {
        "bundle_id": bundle.bundle_id,
        "in_file_prefix": bundle.in_file_prefix,
        "entities": [{"locale": e.locale, "body": e.body}
                     for e in bundle.entities],
        "ground_truth": bundle.ground_truth,
        "metadata": bundle.metadata,
    }


def bundle_from_dict(raw: dict, where: str = "record") -> PromptBundle:
    if not isinstance(raw, dict):
        raise FormatError("bundle must be a JSON object", position=where)
    for key in ("bundle_id", "in_file_prefix", "entities"):
        if key not in raw:
            raise FormatError(f"bundle is missing key {key!r}", position=where)
    entities = []
    for i, ent in enumerate(raw["entities"]):
        if not isinstance(ent, dict) or "locale" not in ent or "body" not in ent:
            raise FormatError(f"entity {i} must carry locale and body",
                              position=where)
        entities.append(BundleEntity(locale=ent["locale"], body=ent["body"]))
    metadata = raw.get("metadata") or {}
    if not isinstance(metadata, dict):
        raise FormatError("metadata must be an object", position=where)
    return PromptBundle(
        bundle_id=raw["bundle_id"],
        in_file_prefix=raw["in_file_prefix"],
        entities=tuple(entities),
        ground_truth=raw.get("ground_truth"),
        metadata=metadata)


def dumps_bundle(bundle: PromptBundle) -> str:
    return json.dumps(bundle_to_dict(bundle), sort_keys=True,
                      ensure_ascii=False, separators=(",", ":"))


def write_bundles(path, bundles: Iterable[PromptBundle]) -> int:
    """Write bundles as JSON Lines; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for bundle in bundles:
            handle.write(dumps_bundle(bundle))
            handle.write("\n")
            count += 1
    return count


def read_bundles(path) -> List[PromptBundle]:
    """Read a JSON Lines bundle file, validating each record."""
    bundles = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc.msg}",
                                  position=f"line {lineno}") from exc
            bundles.append(bundle_from_dict(raw, where=f"line {lineno}"))
    return bundles
