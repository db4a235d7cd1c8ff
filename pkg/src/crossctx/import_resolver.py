"""Resolve import statements to project-local modules and graph nodes.

Two flavors of the same walk: ``scan_imports`` decides locality against
the filesystem (used while building a graph), ``refs_against_graph``
decides it against an existing graph's locales (used at retrieval time,
when the source tree may not be around anymore).

``from X import Y`` is ambiguous between a submodule import and a symbol
import; the submodule interpretation wins when ``X/Y`` exists, matching
how the statement actually binds.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

from .errors import NodeNotFound, ParseError
from .source_parser import EntityKind, SourceSpan


@dataclass(frozen=True)
class ImportRef:
    """One local import binding.

    ``module_path`` is the dotted locale of the imported module.  For a
    symbol import, ``symbol`` carries the name (``"*"`` for star
    imports); module imports leave it None.  ``binding`` is the name the
    statement introduces into the importing scope (None for star).
    """

    module_path: str
    symbol: Optional[str]
    alias: Optional[str]
    span: SourceSpan
    binding: Optional[str] = None


@dataclass
class ImportScan:
    refs: List[ImportRef] = field(default_factory=list)
    local: int = 0
    non_local: int = 0
    unresolved: int = 0


def _iter_import_nodes(node: ast.AST,
                       include_function_bodies: bool) -> Iterator[ast.stmt]:
    for child in ast.iter_child_nodes(node):
        if (isinstance(child, (ast.FunctionDef, ast.AsyncFunctionDef))
                and not include_function_bodies):
            continue
        if isinstance(child, (ast.Import, ast.ImportFrom)):
            yield child
        yield from _iter_import_nodes(child, include_function_bodies)


def _parse(source: str, file_path: str) -> ast.Module:
    try:
        return ast.parse(source)
    except (SyntaxError, ValueError) as exc:
        line = getattr(exc, "lineno", 0) or 0
        col = getattr(exc, "offset", 0) or 0
        raise ParseError(file_path, str(exc), line, col) from exc


def _span(file_path: str, node: ast.stmt) -> SourceSpan:
    return SourceSpan(file_path, node.lineno, node.col_offset,
                      node.end_lineno, node.end_col_offset)


def _dir_segments(file_path: str) -> List[str]:
    parts = file_path.replace("\\", "/").strip("/").split("/")
    return [p for p in parts[:-1] if p]


def _relative_base(file_path: str, level: int) -> Optional[List[str]]:
    """Package segments a level-N relative import is anchored to."""
    parts = _dir_segments(file_path)
    drop = level - 1
    if drop > len(parts):
        return None
    return parts[: len(parts) - drop] if drop else parts


def _join(base: Sequence[str], dotted: str) -> str:
    segments = list(base)
    if dotted:
        segments.extend(dotted.split("."))
    return ".".join(segments)


def resolve_module_file(project_root: Path, dotted: str) -> Optional[str]:
    """Project-relative path of the file providing ``dotted``, if any."""
    if not dotted:
        return None
    rel = dotted.replace(".", "/")
    for candidate in (f"{rel}/__init__.py", f"{rel}.py"):
        if (project_root / candidate).is_file():
            return candidate
    return None


def scan_imports(source: str, project_root: Path, file_path: str = "",
                 include_function_bodies: bool = False) -> ImportScan:
    """Classify every import statement of a file against the filesystem."""
    root = Path(project_root)
    tree = _parse(source, file_path)
    scan = ImportScan()

    def local(ref: ImportRef) -> None:
        scan.refs.append(ref)
        scan.local += 1

    def miss(relative: bool) -> None:
        if relative:
            scan.unresolved += 1
        else:
            scan.non_local += 1

    for node in _iter_import_nodes(tree, include_function_bodies):
        span = _span(file_path, node)
        if isinstance(node, ast.Import):
            for alias in node.names:
                dotted = alias.name
                if resolve_module_file(root, dotted):
                    local(ImportRef(dotted, None, alias.asname, span,
                                    alias.asname or dotted.split(".")[0]))
                elif resolve_module_file(root, dotted.split(".")[0]):
                    scan.unresolved += 1
                else:
                    scan.non_local += 1
            continue

        relative = node.level > 0
        if relative:
            base_parts = _relative_base(file_path, node.level)
            if base_parts is None:
                scan.unresolved += len(node.names)
                continue
            base = _join(base_parts, node.module or "")
        else:
            base = node.module or ""

        for alias in node.names:
            if alias.name == "*":
                if resolve_module_file(root, base):
                    local(ImportRef(base, "*", None, span, None))
                else:
                    miss(relative)
                continue
            as_module = _join(base.split(".") if base else [], alias.name)
            if resolve_module_file(root, as_module):
                local(ImportRef(as_module, None, alias.asname, span,
                                alias.asname or alias.name))
            elif resolve_module_file(root, base):
                local(ImportRef(base, alias.name, alias.asname, span,
                                alias.asname or alias.name))
            else:
                miss(relative)
    return scan


def get_local_import_stmts(source: str, project_root: Path,
                           file_path: str = "",
                           include_function_bodies: bool = False
                           ) -> List[ImportRef]:
    """Local import refs of a file, in statement order."""
    return scan_imports(source, project_root, file_path,
                        include_function_bodies).refs


def refs_against_graph(source: str, graph, file_path: Optional[str] = None,
                       include_function_bodies: bool = False
                       ) -> Tuple[List[ImportRef], List[ImportRef]]:
    """Import refs of a file resolved against a graph's locales.

    Returns ``(refs, missing)``: refs whose module has a File node, and
    refs that look project-local (a path prefix is a known module) but
    whose module is absent, e.g. a file skipped during graph build.
    """

    def file_locale(locale: str) -> bool:
        node = graph.node_for_locale(locale)
        return node is not None and node.kind is EntityKind.FILE

    def prefix_known(dotted: str) -> bool:
        parts = dotted.split(".")
        return any(file_locale(".".join(parts[:i]))
                   for i in range(1, len(parts)))

    tree = _parse(source, file_path or "")
    refs: List[ImportRef] = []
    missing: List[ImportRef] = []

    for node in _iter_import_nodes(tree, include_function_bodies):
        span = _span(file_path or "", node)
        if isinstance(node, ast.Import):
            for alias in node.names:
                dotted = alias.name
                ref = ImportRef(dotted, None, alias.asname, span,
                                alias.asname or dotted.split(".")[0])
                if file_locale(dotted):
                    refs.append(ref)
                elif prefix_known(dotted):
                    missing.append(ref)
            continue

        if node.level > 0:
            if file_path is None:
                continue
            base_parts = _relative_base(file_path, node.level)
            if base_parts is None:
                continue
            base = _join(base_parts, node.module or "")
        else:
            base = node.module or ""

        for alias in node.names:
            if alias.name == "*":
                if file_locale(base):
                    refs.append(ImportRef(base, "*", None, span, None))
                elif base and prefix_known(base):
                    missing.append(ImportRef(base, "*", None, span, None))
                continue
            as_module = _join(base.split(".") if base else [], alias.name)
            if file_locale(as_module):
                refs.append(ImportRef(as_module, None, alias.asname, span,
                                      alias.asname or alias.name))
            elif file_locale(base):
                refs.append(ImportRef(base, alias.name, alias.asname, span,
                                      alias.asname or alias.name))
            elif prefix_known(as_module):
                missing.append(ImportRef(as_module, None, alias.asname, span,
                                         alias.asname or alias.name))
    return refs, missing


def locate_node(graph, ref: ImportRef) -> int:
    """Graph node a local import ref anchors to.

    Module imports land on the File node.  Symbol imports land on the
    entity ``<module>.<symbol>`` when it exists; otherwise the module's
    own Import edges are followed one hop to catch re-exports, and as a
    last resort the File node itself is returned.
    """
    module_node = graph.node_for_locale(ref.module_path)
    if module_node is None or module_node.kind is not EntityKind.FILE:
        raise NodeNotFound(ref)
    if ref.symbol is None or ref.symbol == "*":
        return module_node.id

    direct = graph.node_for_locale(f"{ref.module_path}.{ref.symbol}")
    if direct is not None:
        return direct.id

    candidates = []
    for tail, edge_type, head in graph.edges:
        if tail != module_node.id or edge_type.value != "Import":
            continue
        head_locale = graph.entity(head).locale
        exported = graph.node_for_locale(f"{head_locale}.{ref.symbol}")
        if exported is not None:
            candidates.append(exported.id)
    if candidates:
        return min(candidates)
    return module_node.id
