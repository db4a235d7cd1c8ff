"""Command line interface.

Progress and diagnostics go to stderr; machine-readable results are
written to files, atomically, so a crashed run never leaves a truncated
artifact behind.  Exit codes: 0 success, 1 usage, 2 unreadable or
malformed input, 3 constraint violations (graph too large, budget too
small, broken references).
"""

from __future__ import annotations

import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import click

from . import context_graph, eval_harness, prompt_assembler, retriever
from .errors import (BudgetTooSmall, CrossCtxError, EmptyProject, FormatError,
                     GraphTooLarge, NodeNotFound, ParseError)
from .lexing import tokenizer_names
from .retriever import RetrievedContext

log = logging.getLogger("crossctx")


class NodeNotFoundError(CrossCtxError):
    """A context file references a node id the graph does not contain."""

    def __init__(self, node_id):
        super().__init__(f"context references unknown node {node_id}")
        self.node_id = node_id

_K_OPT = click.option("--k", "k", type=int, default=retriever.DEFAULT_K,
                      show_default=True, envvar="CROSSCTX_K",
                      help="Neighborhood radius in hops.")
_MAX_ENTITIES_OPT = click.option(
    "--max-entities", type=int, default=prompt_assembler.DEFAULT_MAX_ENTITIES,
    show_default=True, envvar="CROSSCTX_MAX_ENTITIES",
    help="Entity cap per prompt.")
_MAX_ENTITY_TOKENS_OPT = click.option(
    "--max-entity-tokens", type=int,
    default=prompt_assembler.DEFAULT_MAX_ENTITY_TOKENS, show_default=True,
    envvar="CROSSCTX_MAX_ENTITY_TOKENS",
    help="Token budget per rendered entity.")
_TOKENIZER_OPT = click.option(
    "--tokenizer", type=click.Choice(tokenizer_names()), default="code",
    show_default=True, envvar="CROSSCTX_TOKENIZER",
    help="Tokenizer profile used for budgets.")
_SIMPLIFIED_OPT = click.option(
    "--simplified/--full", default=False, show_default=True,
    envvar="CROSSCTX_SIMPLIFIED",
    help="Render signatures instead of full entity bodies.")


def _write_atomic(path: str, data: bytes) -> None:
    target = Path(path).resolve()
    fd, tmp = tempfile.mkstemp(dir=str(target.parent), prefix=".crossctx-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _write_json_atomic(path: str, payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2)
    _write_atomic(path, (text + "\n").encode("utf-8"))


def _load_graph(path: str) -> context_graph.ContextGraph:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read graph file: {exc}") from exc
    return context_graph.deserialize(data)


def _read_source(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise FormatError(f"cannot read source file {path}: {exc}") from exc


def _resolve_file_identity(graph, file_arg: str, override: str | None):
    """Project-relative identity of the query file inside the graph.

    Exact match on the graph's file paths wins, then a unique suffix
    match; with neither, retrieval proceeds without self-exclusion.
    """
    if override:
        return override
    known = [f.span.file_path for f in graph.files() if f.span is not None]
    normalized = file_arg.replace("\\", "/")
    if normalized in known:
        return normalized
    suffix_hits = [p for p in known
                   if normalized.endswith("/" + p) or p == normalized]
    if len(suffix_hits) == 1:
        return suffix_hits[0]
    log.warning("query file %s not matched to a graph file; relative "
                "imports and self-exclusion are off", file_arg)
    return None


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Chatty progress output.")
def cli(verbose: bool) -> None:
    """Project context graphs and cross-file context for code completion."""
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")


@cli.command("build-graph")
@click.option("--project-root", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Directory of the project to index.")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Where to write the graph JSON.")
@click.option("--max-nodes", type=int, default=context_graph.DEFAULT_MAX_NODES,
              show_default=True, envvar="CROSSCTX_MAX_NODES",
              help="Refuse to build graphs larger than this.")
def build_graph_cmd(project_root: str, out: str, max_nodes: int) -> None:
    """Parse a project into a context graph."""
    graph, report = context_graph.build_graph_with_report(
        project_root, max_nodes=max_nodes)
    problems = context_graph.validate(graph)
    for problem in problems:
        log.warning("graph violation: %s", problem)
    _write_atomic(out, context_graph.serialize(graph))
    click.echo(
        f"graph: {report['node_count']} nodes, {report['edge_count']} edges, "
        f"{len(report['skipped_files'])} files skipped -> {out}", err=True)


@cli.command("retrieve")
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Graph JSON produced by build-graph.")
@click.option("--file", "file_arg", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Query source file.")
@click.option("--file-path", "file_override", default=None,
              help="Project-relative identity of the query file, when the "
                   "path on disk does not reveal it.")
@_K_OPT
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Where to write the retrieved context JSON.")
def retrieve_cmd(graph_path: str, file_arg: str, file_override: str | None,
                 k: int, out: str) -> None:
    """Retrieve the k-hop import neighborhood for a file."""
    graph = _load_graph(graph_path)
    source = _read_source(file_arg)
    identity = _resolve_file_identity(graph, file_arg, file_override)
    ctx = retriever.retrieve_context(graph, source, k=k, file_path=identity)
    payload = {
        "k": ctx.k,
        "file_path": identity,
        "entities": list(ctx.entities),
        "anchors": [
            {"module_path": ref.module_path, "symbol": ref.symbol,
             "alias": ref.alias, "binding": ref.binding, "node": node_id}
            for ref, node_id in ctx.anchors
        ],
        "missing": [
            {"module_path": ref.module_path, "symbol": ref.symbol}
            for ref in ctx.missing
        ],
    }
    _write_json_atomic(out, payload)
    click.echo(f"retrieved {len(ctx.entities)} entities from "
               f"{len(ctx.anchors)} anchors -> {out}", err=True)


@cli.command("assemble")
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--context", "context_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Context JSON produced by retrieve.")
@click.option("--file", "file_arg", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Query source file; its content becomes the prefix.")
@_MAX_ENTITIES_OPT
@_MAX_ENTITY_TOKENS_OPT
@_TOKENIZER_OPT
@_SIMPLIFIED_OPT
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Where to write the bundle JSONL.")
def assemble_cmd(graph_path: str, context_path: str, file_arg: str,
                 max_entities: int, max_entity_tokens: int, tokenizer: str,
                 simplified: bool, out: str) -> None:
    """Render a retrieved context into a prompt bundle."""
    graph = _load_graph(graph_path)
    try:
        raw = json.loads(Path(context_path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise FormatError(f"cannot read context file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid context JSON: {exc.msg}",
                          position=exc.pos) from exc
    if not isinstance(raw, dict) or "entities" not in raw:
        raise FormatError("context JSON must be an object with entities")
    ids = raw["entities"]
    for node_id in ids:
        if node_id not in graph.nodes:
            raise NodeNotFoundError(node_id)
    source = _read_source(file_arg)
    ctx = RetrievedContext(entities=tuple(ids), anchors=(),
                           k=raw.get("k", retriever.DEFAULT_K))
    bundle = prompt_assembler.assemble_bundle(
        graph, ctx, source,
        bundle_id=raw.get("file_path") or Path(file_arg).name,
        max_entities=max_entities,
        max_entity_tokens=max_entity_tokens,
        tokenizer=tokenizer,
        simplified=simplified,
        metadata={"missing_imports": len(raw.get("missing", [])),
                  "source_path": raw.get("file_path")})
    data = prompt_assembler.dumps_bundle(bundle) + "\n"
    _write_atomic(out, data.encode("utf-8"))
    click.echo(f"assembled {len(bundle.entities)} entities -> {out}", err=True)


@cli.command("make-prompts")
@click.option("--project-root", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Where to write the prompt bundles JSONL.")
@_K_OPT
@_MAX_ENTITIES_OPT
@_MAX_ENTITY_TOKENS_OPT
@_TOKENIZER_OPT
@_SIMPLIFIED_OPT
@click.option("--max-nodes", type=int, default=context_graph.DEFAULT_MAX_NODES,
              show_default=True, envvar="CROSSCTX_MAX_NODES")
def make_prompts_cmd(project_root: str, out: str, k: int, max_entities: int,
                     max_entity_tokens: int, tokenizer: str, simplified: bool,
                     max_nodes: int) -> None:
    """Cut completion prompts for every cross-file call site."""
    graph, report = context_graph.build_graph_with_report(
        project_root, max_nodes=max_nodes)
    click.echo(f"graph: {report['node_count']} nodes, "
               f"{report['edge_count']} edges", err=True)
    bundles = eval_harness.build_completion_prompts(
        project_root, graph, k=k, max_entities=max_entities,
        max_entity_tokens=max_entity_tokens, tokenizer=tokenizer,
        simplified=simplified)
    lines = "".join(prompt_assembler.dumps_bundle(b) + "\n" for b in bundles)
    _write_atomic(out, lines.encode("utf-8"))
    click.echo(f"wrote {len(bundles)} prompts -> {out}", err=True)


@cli.command("eval")
@click.option("--bundles", "bundles_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--predictions", "predictions_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--report", "report_path", required=True,
              type=click.Path(dir_okay=False),
              help="Where to write the metrics report JSON.")
def eval_cmd(bundles_path: str, predictions_path: str,
             report_path: str) -> None:
    """Score predictions against bundle ground truths."""
    bundles = prompt_assembler.read_bundles(bundles_path)
    predictions = eval_harness.read_predictions(predictions_path)
    report = eval_harness.evaluate(bundles, predictions)
    _write_json_atomic(report_path, report)
    click.echo(
        f"scored {report['examples']} examples "
        f"(missing {report['missing_predictions']}): "
        f"em {report['code_em']:.2f}, bleu4 {report['bleu4']:.2f}, "
        f"id-recall {report['identifier_recall']:.2f} -> {report_path}",
        err=True)


@cli.command("stats")
@click.option("--bundles", "bundles_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Where to write the stats JSON.")
def stats_cmd(bundles_path: str, out: str) -> None:
    """Summarize prompt sizes and entity usage for a bundle set."""
    bundles = prompt_assembler.read_bundles(bundles_path)
    _write_json_atomic(out, eval_harness.retrieval_stats(bundles))
    click.echo(f"stats over {len(bundles)} bundles -> {out}", err=True)


def main(argv=None) -> int:
    """Entry point; returns an exit code instead of raising SystemExit."""
    try:
        cli.main(args=argv, standalone_mode=False,
                 auto_envvar_prefix="CROSSCTX")
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.exceptions.ClickException as exc:
        exc.show()
        return 1
    except (FormatError, EmptyProject, ParseError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (GraphTooLarge, BudgetTooSmall, NodeNotFound,
            NodeNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except CrossCtxError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
