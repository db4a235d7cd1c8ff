"""Extract project entities from Python source files.

A source file yields one File entity plus one entity per top-level
function, top-level class, class method, and global variable binding.
Only direct children of the module (and, for methods, direct children of
a class body) count; anything nested under ``if``/``try`` or inside a
function body belongs to the enclosing entity's text instead.

Entity ids are assigned later by the graph builder; the parser leaves
them at -1.
"""

from __future__ import annotations

import ast
import textwrap
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from .errors import ParseError
from .lexing import find_header_colon


class EntityKind(str, Enum):
    ROOT = "Root"
    FILE = "File"
    CLASS = "Class"
    FUNCTION = "Function"
    GLOBAL_VAR = "GlobalVar"


@dataclass(frozen=True)
class SourceSpan:
    """Half-open region of a file; lines are 1-based, columns are the
    byte offsets reported by the parser."""

    file_path: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int


@dataclass(frozen=True)
class ProjectEntity:
    id: int
    kind: EntityKind
    locale: str
    name: str
    text: str
    span: Optional[SourceSpan]
    file_order_index: int


def module_segments(file_path: str) -> Tuple[str, ...]:
    """Locale segments for a file: path with the extension stripped and
    separators dotted; ``__init__`` collapses onto its package."""
    parts = file_path.replace("\\", "/").strip("/").split("/")
    stem = parts[-1]
    if "." in stem:
        stem = stem[: stem.rindex(".")]
    parts[-1] = stem
    if stem == "__init__" and len(parts) > 1:
        parts = parts[:-1]
    return tuple(p for p in parts if p)


def module_locale(file_path: str) -> str:
    return ".".join(module_segments(file_path))


def compute_locale(file_path: str, enclosing: Optional[str] = None,
                   name: Optional[str] = None) -> str:
    """Dotted locale for an entity of ``file_path``.

    With no arguments beyond the path this is the module locale; a name
    appends one segment, and ``enclosing`` (an existing locale) replaces
    the module prefix for nested entities such as methods.
    """
    if enclosing is not None:
        return f"{enclosing}.{name}" if name else enclosing
    base = module_locale(file_path)
    return f"{base}.{name}" if name else base


class SourceMap:
    """Byte-accurate slicing, since ast column offsets count utf-8 bytes."""

    def __init__(self, source: str):
        self.data = source.encode("utf-8")
        self.line_starts = [0]
        for i, byte in enumerate(self.data):
            if byte == 0x0A:
                self.line_starts.append(i + 1)

    def offset(self, line: int, col: int) -> int:
        return self.line_starts[line - 1] + col

    def segment(self, start_line: int, start_col: int,
                end_line: int, end_col: int) -> str:
        start = self.offset(start_line, start_col)
        end = self.offset(end_line, end_col)
        return self.data[start:end].decode("utf-8")

    def line(self, line: int) -> str:
        start = self.line_starts[line - 1]
        end = self.line_starts[line] if line < len(self.line_starts) else len(self.data)
        return self.data[start:end].decode("utf-8").rstrip("\n")

    def prefix(self, line: int, col: int) -> str:
        return self.data[: self.offset(line, col)].decode("utf-8")


def _node_start(node: ast.stmt) -> Tuple[int, int]:
    """Start position including decorators."""
    decorators = getattr(node, "decorator_list", None)
    if decorators:
        first = decorators[0]
        return first.lineno, max(0, first.col_offset - 1)
    return node.lineno, node.col_offset


def _node_span(path: str, node: ast.stmt) -> SourceSpan:
    line, col = _node_start(node)
    return SourceSpan(path, line, col, node.end_lineno, node.end_col_offset)


def _statement_text(src: SourceMap, node: ast.stmt) -> str:
    line, col = _node_start(node)
    raw = src.segment(line, 0, node.end_lineno, node.end_col_offset)
    return textwrap.dedent(raw)


def _docstring_node(body: Sequence[ast.stmt]) -> Optional[ast.Expr]:
    if body and isinstance(body[0], ast.Expr):
        value = body[0].value
        if isinstance(value, ast.Constant) and isinstance(value.value, str):
            return body[0]
    return None


def extract_class_text(src: SourceMap, node: ast.ClassDef) -> str:
    """Condensed class body: header, docstring, class-level assignments,
    and the ``self.*`` assignments from ``__init__``.

    Method bodies are deliberately dropped; methods become entities of
    their own.
    """
    start_line, _ = _node_start(node)
    lines: List[int] = []

    from_header = src.data[src.offset(node.lineno, node.col_offset):].decode("utf-8")
    colon = find_header_colon(from_header)
    header_end_line = node.lineno + (from_header[:colon].count("\n") if colon >= 0 else 0)
    lines.extend(range(start_line, header_end_line + 1))

    def add_stmt(stmt: ast.stmt) -> None:
        first, _ = _node_start(stmt)
        lines.extend(range(first, stmt.end_lineno + 1))

    doc = _docstring_node(node.body)
    if doc is not None:
        add_stmt(doc)
    for stmt in node.body:
        if isinstance(stmt, (ast.Assign, ast.AnnAssign)):
            add_stmt(stmt)
        elif (isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef))
              and stmt.name == "__init__"):
            for inner in ast.walk(stmt):
                if isinstance(inner, ast.Assign):
                    targets = inner.targets
                elif isinstance(inner, ast.AnnAssign):
                    targets = [inner.target]
                else:
                    continue
                if any(isinstance(t, ast.Attribute)
                       and isinstance(t.value, ast.Name)
                       and t.value.id == "self" for t in targets):
                    add_stmt(inner)

    seen = sorted(set(lines))
    text = "\n".join(src.line(n) for n in seen)
    return textwrap.dedent(text)


def _file_text(path: str, src: SourceMap, tree: ast.Module) -> str:
    parts = [f"# {path}"]
    doc = _docstring_node(tree.body)
    if doc is not None:
        parts.append(src.segment(doc.lineno, doc.col_offset,
                                 doc.end_lineno, doc.end_col_offset))
    return "\n".join(parts)


def _global_var_targets(node: ast.stmt) -> List[ast.Name]:
    """Name bindings created by a module-level assignment statement."""
    names: List[ast.Name] = []

    def collect(target: ast.expr) -> None:
        if isinstance(target, ast.Name):
            names.append(target)
        elif isinstance(target, (ast.Tuple, ast.List)):
            for elt in target.elts:
                collect(elt)

    if isinstance(node, ast.Assign):
        for target in node.targets:
            collect(target)
    elif isinstance(node, ast.AnnAssign) and isinstance(node.target, ast.Name):
        names.append(node.target)
    return names


def parse_file(file_path: str, source: str) -> List[ProjectEntity]:
    """Parse one file into its entities, File entity first.

    ``file_path`` is the project-relative path; it seeds every locale.
    Raises ParseError when the source does not parse.
    """
    try:
        tree = ast.parse(source)
    except (SyntaxError, ValueError) as exc:
        line = getattr(exc, "lineno", 0) or 0
        col = getattr(exc, "offset", 0) or 0
        raise ParseError(file_path, str(exc.msg if hasattr(exc, "msg") else exc),
                         line, col) from exc

    src = SourceMap(source)
    mod_locale = module_locale(file_path)
    segments = module_segments(file_path)
    file_name = segments[-1] if segments else file_path

    # Module-level records keyed by name; a later binding of the same
    # name displaces the earlier one, methods and all.
    records: "dict[str, dict]" = {}

    doc = _docstring_node(tree.body)
    for node in tree.body:
        if node is doc:
            continue
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            records[node.name] = {
                "kind": EntityKind.FUNCTION,
                "name": node.name,
                "text": _statement_text(src, node),
                "span": _node_span(file_path, node),
                "pos": _node_start(node),
                "methods": [],
            }
        elif isinstance(node, ast.ClassDef):
            methods = []
            for stmt in node.body:
                if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
                    methods.append({
                        "name": stmt.name,
                        "text": _statement_text(src, stmt),
                        "span": _node_span(file_path, stmt),
                        "pos": _node_start(stmt),
                    })
            # Repeated method names inside one class: keep the later one.
            by_name = {m["name"]: m for m in methods}
            records[node.name] = {
                "kind": EntityKind.CLASS,
                "name": node.name,
                "text": extract_class_text(src, node),
                "span": _node_span(file_path, node),
                "pos": _node_start(node),
                "methods": list(by_name.values()),
            }
        elif isinstance(node, (ast.Assign, ast.AnnAssign)):
            text = _statement_text(src, node)
            span = _node_span(file_path, node)
            for target in _global_var_targets(node):
                records[target.id] = {
                    "kind": EntityKind.GLOBAL_VAR,
                    "name": target.id,
                    "text": text,
                    "span": span,
                    "pos": (target.lineno, target.col_offset),
                    "methods": [],
                }

    flat: List[dict] = []
    for rec in records.values():
        flat.append(rec)
        if rec["kind"] is EntityKind.CLASS:
            class_locale = compute_locale(file_path, name=rec["name"])
            for meth in rec["methods"]:
                flat.append({
                    "kind": EntityKind.FUNCTION,
                    "name": meth["name"],
                    "text": meth["text"],
                    "span": meth["span"],
                    "pos": meth["pos"],
                    "locale": compute_locale(file_path, enclosing=class_locale,
                                             name=meth["name"]),
                })
    flat.sort(key=lambda r: r["pos"])

    entities = [ProjectEntity(
        id=-1,
        kind=EntityKind.FILE,
        locale=mod_locale,
        name=file_name,
        text=_file_text(file_path, src, tree),
        span=SourceSpan(file_path, 1, 0,
                        tree.body[-1].end_lineno if tree.body else 1,
                        tree.body[-1].end_col_offset if tree.body else 0),
        file_order_index=0,
    )]
    for index, rec in enumerate(flat, start=1):
        locale = rec.get("locale") or compute_locale(file_path, name=rec["name"])
        entities.append(ProjectEntity(
            id=-1,
            kind=rec["kind"],
            locale=locale,
            name=rec["name"],
            text=rec["text"],
            span=rec["span"],
            file_order_index=index,
        ))
    return entities


def with_id(entity: ProjectEntity, entity_id: int) -> ProjectEntity:
    return replace(entity, id=entity_id)
