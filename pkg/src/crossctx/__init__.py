"""Cross-file context for code completion.

Parse a Python project into a typed entity graph, retrieve the k-hop
neighborhood of whatever a file imports, and render the result into
token-budgeted prompts with ground truths and metrics attached.
"""

from .context_graph import (ContextGraph, EdgeType, build_graph,
                            build_graph_with_report, deserialize, serialize,
                            validate)
from .errors import (BudgetTooSmall, CrossCtxError, EmptyProject, FormatError,
                     GraphTooLarge, NodeNotFound, ParseError)
from .eval_harness import (build_completion_prompts, code_match, evaluate,
                           extract_identifiers, id_match, identifier_recall,
                           read_predictions, retrieval_stats, smoothed_bleu)
from .import_resolver import (ImportRef, get_local_import_stmts, locate_node,
                              scan_imports)
from .prompt_assembler import (BundleEntity, PromptBundle, assemble_bundle,
                               assemble_entity_text, read_bundles,
                               write_bundles)
from .retriever import RetrievedContext, dfs_k_hop, reorder_nodes, retrieve_context
from .source_parser import (EntityKind, ProjectEntity, SourceSpan,
                            compute_locale, parse_file)

__version__ = "0.1.0"

__all__ = [
    "BudgetTooSmall", "BundleEntity", "ContextGraph", "CrossCtxError",
    "EdgeType", "EmptyProject", "EntityKind", "FormatError", "GraphTooLarge",
    "ImportRef", "NodeNotFound", "ParseError", "ProjectEntity", "PromptBundle",
    "RetrievedContext", "SourceSpan", "assemble_bundle",
    "assemble_entity_text", "build_completion_prompts", "build_graph",
    "build_graph_with_report", "code_match", "compute_locale", "deserialize",
    "dfs_k_hop", "evaluate", "extract_identifiers", "get_local_import_stmts",
    "id_match", "identifier_recall", "locate_node", "parse_file",
    "read_bundles", "read_predictions", "reorder_nodes", "retrieval_stats",
    "retrieve_context",
    "scan_imports", "serialize", "smoothed_bleu", "validate", "write_bundles",
]
