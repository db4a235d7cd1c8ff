"""Completion prompt construction and prediction scoring.

Prompts are cut in front of statements that call something imported from
another project file, so every example genuinely needs cross-file
context.  Scoring covers exact match (trailing whitespace ignored),
smoothed 4-gram BLEU over lexer tokens, and identifier overlap.
"""

from __future__ import annotations

import ast
import json
import math
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import FormatError
from .import_resolver import get_local_import_stmts
from .lexing import (find_header_colon, get_tokenizer, identifier_tokens,
                     statement_tokens)
from .prompt_assembler import (DEFAULT_MAX_ENTITIES, DEFAULT_MAX_ENTITY_TOKENS,
                               PromptBundle, assemble_bundle)
from .retriever import DEFAULT_K, retrieve_context
from .source_parser import SourceMap

_COMPOUND = (ast.If, ast.For, ast.AsyncFor, ast.While, ast.With,
             ast.AsyncWith, ast.Try, ast.FunctionDef, ast.AsyncFunctionDef,
             ast.ClassDef)
if hasattr(ast, "Match"):
    _COMPOUND = _COMPOUND + (ast.Match,)
if hasattr(ast, "TryStar"):
    _COMPOUND = _COMPOUND + (ast.TryStar,)


def extract_identifiers(code: str) -> List[str]:
    """Identifier tokens of a snippet in order, keywords and the inside
    of strings and comments excluded."""
    return identifier_tokens(code)


def id_match(pred_ids: Sequence[str], gt_ids: Sequence[str]
             ) -> Tuple[int, float, float]:
    """Exact-match flag, precision and recall of identifier multisets.

    Two empty sequences count as a perfect match; when only one side is
    empty there is no overlap, so precision and recall are both zero.
    """
    exact = int(list(pred_ids) == list(gt_ids))
    if not pred_ids and not gt_ids:
        return 1, 1.0, 1.0
    overlap = sum((Counter(pred_ids) & Counter(gt_ids)).values())
    precision = overlap / len(pred_ids) if pred_ids else 0.0
    recall = overlap / len(gt_ids) if gt_ids else 0.0
    return exact, precision, recall


def _strip_trailing(text: str) -> str:
    return "\n".join(line.rstrip() for line in text.split("\n")).rstrip("\n")


def smoothed_bleu(pred_tokens: Sequence[str], gt_tokens: Sequence[str],
                  max_n: int = 4) -> float:
    """BLEU with add-one smoothing on the higher-order n-gram precisions.

    Unigram precision stays unsmoothed, so a candidate sharing no tokens
    with the reference scores zero.
    """
    if not pred_tokens and not gt_tokens:
        return 1.0
    if not pred_tokens or not gt_tokens:
        return 0.0

    log_sum = 0.0
    for n in range(1, max_n + 1):
        pred_grams = Counter(tuple(pred_tokens[i:i + n])
                             for i in range(len(pred_tokens) - n + 1))
        gt_grams = Counter(tuple(gt_tokens[i:i + n])
                           for i in range(len(gt_tokens) - n + 1))
        matches = sum((pred_grams & gt_grams).values())
        total = max(0, len(pred_tokens) - n + 1)
        if n == 1:
            if matches == 0:
                return 0.0
            precision = matches / total
        else:
            precision = (matches + 1) / (total + 1)
        log_sum += math.log(precision)

    brevity = 1.0
    if len(pred_tokens) < len(gt_tokens):
        brevity = math.exp(1 - len(gt_tokens) / len(pred_tokens))
    return brevity * math.exp(log_sum / max_n)


def code_match(pred: str, gt: str) -> Tuple[int, float]:
    """(exact_match, bleu4) for a predicted completion.

    Exact match normalizes trailing whitespace only: each line is
    right-stripped and trailing blank lines are dropped.  BLEU runs on
    lexer tokens with comments removed.
    """
    exact = int(_strip_trailing(pred) == _strip_trailing(gt))
    bleu = smoothed_bleu(statement_tokens(pred), statement_tokens(gt))
    return exact, bleu


def identifier_recall(bundles: Iterable[PromptBundle],
                      scope: str = "context") -> float:
    """Share of ground-truth identifier occurrences available in the
    prompt, as a percentage, micro-averaged over the bundle set.

    ``scope`` is ``"in_file"`` (prefix only) or ``"context"`` (prefix
    plus the retrieved entity blocks).
    """
    if scope not in ("in_file", "context"):
        raise ValueError(f"unknown scope {scope!r}")
    found = 0
    total = 0
    for bundle in bundles:
        if bundle.ground_truth is None:
            continue
        gt_ids = identifier_tokens(bundle.ground_truth)
        if not gt_ids:
            continue
        available = set(identifier_tokens(bundle.in_file_prefix))
        if scope == "context":
            for entity in bundle.entities:
                available.update(identifier_tokens(entity.body))
        total += len(gt_ids)
        found += sum(1 for name in gt_ids if name in available)
    return 100.0 * found / total if total else 0.0


def _threshold_shares(values: Sequence[int],
                      thresholds: Sequence[int]) -> Dict[str, float]:
    if not values:
        return {str(t): 0.0 for t in thresholds}
    n = len(values)
    return {str(t): round(100.0 * sum(1 for v in values if v > t) / n, 6)
            for t in thresholds}


def retrieval_stats(bundles: Iterable[PromptBundle]) -> dict:
    """Usage statistics over a bundle set.

    Entity counts and per-entity token counts come from the bundle
    metadata recorded before truncation, falling back to what is
    physically in the bundle when metadata is absent.
    """
    entity_counts: List[int] = []
    token_counts: List[int] = []
    prompt_lengths: List[int] = []

    for bundle in bundles:
        meta = bundle.metadata or {}
        count = meta.get("retrieved_entity_count")
        entity_counts.append(count if isinstance(count, int)
                             else len(bundle.entities))
        raw = meta.get("entity_token_counts")
        profile = get_tokenizer(meta.get("tokenizer", "code"))
        if isinstance(raw, list) and all(isinstance(v, int) for v in raw):
            token_counts.extend(raw)
        else:
            token_counts.extend(profile.count(e.body) for e in bundle.entities)
        prompt = bundle.in_file_prefix + "".join(
            e.body for e in bundle.entities)
        prompt_lengths.append(profile.count(prompt))

    def describe(values: List[int]) -> dict:
        if not values:
            return {"count": 0, "mean": 0.0, "min": 0, "max": 0}
        return {"count": len(values),
                "mean": round(sum(values) / len(values), 6),
                "min": min(values), "max": max(values)}

    thresholds = (32, 64, 128, 256)
    return {
        "bundles": len(entity_counts),
        "entities_per_prompt": {
            **describe(entity_counts),
            "share_over": _threshold_shares(entity_counts, thresholds),
        },
        "tokens_per_entity": {
            **describe(token_counts),
            "share_over": _threshold_shares(token_counts, thresholds),
        },
        "prompt_tokens": describe(prompt_lengths),
    }


def _non_stmt_walk(node: ast.AST):
    yield node
    for child in ast.iter_child_nodes(node):
        if isinstance(child, ast.stmt):
            continue
        yield from _non_stmt_walk(child)


def _header_calls(stmt: ast.stmt) -> List[ast.Call]:
    """Call nodes belonging to a statement itself: its expressions and
    compound header, but not nested statements or decorators."""
    calls: List[ast.Call] = []
    for field_name, value in ast.iter_fields(stmt):
        if field_name == "decorator_list":
            continue
        items = value if isinstance(value, list) else [value]
        for item in items:
            if not isinstance(item, ast.AST) or isinstance(item, ast.stmt):
                continue
            for sub in _non_stmt_walk(item):
                if isinstance(sub, ast.Call):
                    calls.append(sub)
    return calls


def _callee_root(expr: ast.expr) -> Optional[str]:
    while True:
        if isinstance(expr, (ast.Attribute, ast.Subscript)):
            expr = expr.value
        elif isinstance(expr, ast.Call):
            expr = expr.func
        else:
            break
    return expr.id if isinstance(expr, ast.Name) else None


def build_completion_prompts(project_root, graph, k: int = DEFAULT_K,
                             max_entities: int = DEFAULT_MAX_ENTITIES,
                             max_entity_tokens: int = DEFAULT_MAX_ENTITY_TOKENS,
                             tokenizer: str = "code",
                             simplified: bool = False) -> List[PromptBundle]:
    """Cut a completion prompt in front of every statement that calls
    through a local import binding.

    The prefix is everything before the statement; the ground truth is
    the statement itself, or just the header line for compound
    statements.  Files are taken from the graph, so anything skipped at
    build time is skipped here too.
    """
    root = Path(project_root).resolve()
    bundles: List[PromptBundle] = []

    for file_entity in graph.files():
        rel = file_entity.span.file_path if file_entity.span else None
        if rel is None:
            continue
        try:
            source = (root / rel).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError):
            continue

        refs = get_local_import_stmts(source, root, rel)
        bindings = {ref.binding for ref in refs if ref.binding}
        if not bindings:
            continue

        try:
            tree = ast.parse(source)
        except (SyntaxError, ValueError):
            continue
        src = SourceMap(source)
        ctx = retrieve_context(graph, source, k, file_path=rel)

        cuts: Dict[Tuple[int, int], ast.stmt] = {}
        for stmt in ast.walk(tree):
            if not isinstance(stmt, ast.stmt):
                continue
            qualifying = any(_callee_root(call.func) in bindings
                             for call in _header_calls(stmt))
            if qualifying:
                cuts.setdefault((stmt.lineno, stmt.col_offset), stmt)

        for (line, col) in sorted(cuts):
            stmt = cuts[(line, col)]
            prefix = src.prefix(line, col)
            start = src.offset(line, col)
            if isinstance(stmt, _COMPOUND):
                suffix = src.data[start:].decode("utf-8")
                colon = find_header_colon(suffix)
                end_text = suffix[:colon + 1] if colon >= 0 else suffix
                ground_truth = end_text
            else:
                ground_truth = src.segment(line, col,
                                           stmt.end_lineno, stmt.end_col_offset)
            bundles.append(assemble_bundle(
                graph, ctx, prefix,
                ground_truth=ground_truth,
                bundle_id=f"{rel}:{line}:{col}",
                max_entities=max_entities,
                max_entity_tokens=max_entity_tokens,
                tokenizer=tokenizer,
                simplified=simplified,
                metadata={"source_path": rel, "cut_line": line,
                          "cut_col": col}))
    return bundles


def read_predictions(path) -> Dict[str, str]:
    """Read predictions JSONL ({"bundle_id", "prediction"} per line)."""
    predictions: Dict[str, str] = {}
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
            if (not isinstance(raw, dict) or "bundle_id" not in raw
                    or "prediction" not in raw):
                raise FormatError(
                    "prediction record needs bundle_id and prediction",
                    position=f"line {lineno}")
            predictions[raw["bundle_id"]] = raw["prediction"]
    return predictions


def evaluate(bundles: Sequence[PromptBundle],
             predictions: Dict[str, str]) -> dict:
    """Score predictions against bundle ground truths.

    Bundles without a prediction are skipped and counted rather than
    scored as zero, so partial prediction files stay comparable.
    """
    per_example = []
    missing = 0
    used = set()
    scorable = [b for b in bundles if b.ground_truth is not None]

    for bundle in scorable:
        pred = predictions.get(bundle.bundle_id)
        if pred is None:
            missing += 1
            continue
        used.add(bundle.bundle_id)
        exact, bleu = code_match(pred, bundle.ground_truth)
        id_exact, id_prec, id_rec = id_match(
            extract_identifiers(pred),
            extract_identifiers(bundle.ground_truth))
        per_example.append({
            "bundle_id": bundle.bundle_id,
            "code_em": exact,
            "bleu4": round(bleu, 6),
            "identifier_em": id_exact,
            "identifier_precision": round(id_prec, 6),
            "identifier_recall": round(id_rec, 6),
        })

    def mean(key: str) -> float:
        if not per_example:
            return 0.0
        return sum(row[key] for row in per_example) / len(per_example)

    report = {
        "examples": len(per_example),
        "missing_predictions": missing,
        "extra_predictions": len(set(predictions) - used),
        "code_em": round(100.0 * mean("code_em"), 6),
        "bleu4": round(100.0 * mean("bleu4"), 6),
        "identifier_em": round(100.0 * mean("identifier_em"), 6),
        "identifier_precision": round(100.0 * mean("identifier_precision"), 6),
        "identifier_recall": round(100.0 * mean("identifier_recall"), 6),
        "reference_identifier_recall": {
            "in_file": round(identifier_recall(scorable, "in_file"), 6),
            "context": round(identifier_recall(scorable, "context"), 6),
        },
        "normalization": ("exact match ignores trailing whitespace: lines "
                          "are right-stripped and trailing blank lines "
                          "dropped before comparison"),
        "per_example": per_example,
    }
    return report
