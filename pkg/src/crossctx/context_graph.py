"""Build, validate and serialize project context graphs.

The graph is multi-relational: nodes are project entities (a synthetic
Root, plus File / Class / Function / GlobalVar entities) and each edge
carries one of nine types.  Membership edges between a file and its
classes, functions and global variables exist in both directions, so a
walk can hop from an entity back to its file and out to siblings.
Import edges and class-to-method edges are one-way.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

from . import source_parser
from .errors import EmptyProject, FormatError, GraphTooLarge, ParseError
from .import_resolver import scan_imports
from .source_parser import EntityKind, ProjectEntity, SourceSpan, module_segments

log = logging.getLogger(__name__)

DEFAULT_MAX_NODES = 5000


class EdgeType(str, Enum):
    PROJECT_FILE = "ProjectFile"
    IMPORT = "Import"
    GLOBAL_VAR = "GlobalVar"
    GLOBAL_VAR_REVERSE = "GlobalVarReverse"
    FUNCTION = "Function"
    FUNCTION_REVERSE = "FunctionReverse"
    CLASS = "Class"
    CLASS_REVERSE = "ClassReverse"
    MEMBER_FUNCTION = "MemberFunction"


# Endpoint kinds each edge type is allowed to connect.
EDGE_ENDPOINTS: Dict[EdgeType, Tuple[EntityKind, EntityKind]] = {
    EdgeType.PROJECT_FILE: (EntityKind.ROOT, EntityKind.FILE),
    EdgeType.IMPORT: (EntityKind.FILE, EntityKind.FILE),
    EdgeType.GLOBAL_VAR: (EntityKind.FILE, EntityKind.GLOBAL_VAR),
    EdgeType.GLOBAL_VAR_REVERSE: (EntityKind.GLOBAL_VAR, EntityKind.FILE),
    EdgeType.FUNCTION: (EntityKind.FILE, EntityKind.FUNCTION),
    EdgeType.FUNCTION_REVERSE: (EntityKind.FUNCTION, EntityKind.FILE),
    EdgeType.CLASS: (EntityKind.FILE, EntityKind.CLASS),
    EdgeType.CLASS_REVERSE: (EntityKind.CLASS, EntityKind.FILE),
    EdgeType.MEMBER_FUNCTION: (EntityKind.CLASS, EntityKind.FUNCTION),
}

# Membership edges come in forward/reverse pairs; the rest are one-way.
REVERSE_OF: Dict[EdgeType, EdgeType] = {
    EdgeType.GLOBAL_VAR: EdgeType.GLOBAL_VAR_REVERSE,
    EdgeType.FUNCTION: EdgeType.FUNCTION_REVERSE,
    EdgeType.CLASS: EdgeType.CLASS_REVERSE,
}
FORWARD_OF = {v: k for k, v in REVERSE_OF.items()}

Edge = Tuple[int, EdgeType, int]


@dataclass
class ContextGraph:
    project_root: str
    nodes: Dict[int, ProjectEntity]
    edges: Set[Edge]
    root_id: int = 0
    _locale_index: Dict[str, int] = field(
        init=False, repr=False, compare=False, default_factory=dict)
    _adjacency: Optional[Dict[int, Tuple[int, ...]]] = field(
        init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        for node in self.nodes.values():
            if node.kind is not EntityKind.ROOT and node.locale:
                self._locale_index[node.locale] = node.id

    def entity(self, node_id: int) -> ProjectEntity:
        return self.nodes[node_id]

    def node_for_locale(self, locale: str) -> Optional[ProjectEntity]:
        node_id = self._locale_index.get(locale)
        return None if node_id is None else self.nodes[node_id]

    def files(self) -> List[ProjectEntity]:
        return [n for n in sorted(self.nodes.values(), key=lambda n: n.id)
                if n.kind is EntityKind.FILE]

    def adjacency(self) -> Dict[int, Tuple[int, ...]]:
        """Outgoing neighbors per node, ids ascending, edge types erased."""
        if self._adjacency is None:
            out: Dict[int, Set[int]] = {node_id: set() for node_id in self.nodes}
            for tail, _type, head in self.edges:
                out[tail].add(head)
            self._adjacency = {nid: tuple(sorted(heads))
                               for nid, heads in out.items()}
        return self._adjacency


def _project_files(root: Path) -> List[str]:
    """Relative posix paths of source files, hidden trees skipped."""
    found = []
    for path in root.rglob("*.py"):
        rel = path.relative_to(root)
        if any(part.startswith(".") for part in rel.parts):
            continue
        if path.is_file():
            found.append(rel.as_posix())
    return sorted(found)


def build_graph_with_report(project_root, max_nodes: int = DEFAULT_MAX_NODES
                            ) -> Tuple[ContextGraph, dict]:
    """Build the graph for a source tree and report what was skipped.

    Raises EmptyProject when nothing parses and GraphTooLarge when the
    node count would exceed ``max_nodes``.
    """
    root = Path(project_root).resolve()
    report: dict = {"files": {}, "skipped_files": [], "dropped_entities": []}

    paths = _project_files(root)

    # Two files can claim one module locale (pkg/util.py next to
    # pkg/util/__init__.py); the package form wins.
    by_locale: Dict[str, str] = {}
    for rel in paths:
        locale = ".".join(module_segments(rel))
        other = by_locale.get(locale)
        if other is None:
            by_locale[locale] = rel
            continue
        keep, drop = (rel, other) if rel.endswith("__init__.py") else (other, rel)
        by_locale[locale] = keep
        report["skipped_files"].append(
            {"path": drop, "reason": f"module locale {locale!r} already taken"})
        log.warning("skipping %s: locale %r already provided by %s",
                    drop, locale, keep)
    kept_paths = sorted(by_locale.values())

    parsed: List[Tuple[str, List[ProjectEntity], str]] = []
    for rel in kept_paths:
        try:
            text = (root / rel).read_text(encoding="utf-8")
            entities = source_parser.parse_file(rel, text)
        except (ParseError, UnicodeDecodeError, OSError) as exc:
            report["skipped_files"].append({"path": rel, "reason": str(exc)})
            log.warning("skipping %s: %s", rel, exc)
            continue
        parsed.append((rel, entities, text))

    if not parsed:
        raise EmptyProject(f"no parseable source files under {root}")

    # Drop members whose locale collides with a file or an earlier member.
    taken: Set[str] = {".".join(module_segments(rel)) for rel, _, _ in parsed}
    cleaned: List[Tuple[str, List[ProjectEntity], str]] = []
    for rel, entities, text in parsed:
        kept = [entities[0]]
        dropped_classes: Set[str] = set()
        for ent in entities[1:]:
            parent = ent.locale.rsplit(".", 1)[0]
            if parent in dropped_classes:
                report["dropped_entities"].append(ent.locale)
                continue
            if ent.locale in taken:
                report["dropped_entities"].append(ent.locale)
                log.warning("dropping entity %s: locale already taken", ent.locale)
                if ent.kind is EntityKind.CLASS:
                    dropped_classes.add(ent.locale)
                continue
            taken.add(ent.locale)
            kept.append(ent)
        reindexed = [replace(e, id=-1, file_order_index=i)
                     for i, e in enumerate(kept)]
        cleaned.append((rel, reindexed, text))

    node_count = 1 + sum(len(ents) for _, ents, _ in cleaned)
    if node_count > max_nodes:
        raise GraphTooLarge(node_count, max_nodes)

    nodes: Dict[int, ProjectEntity] = {}
    root_entity = ProjectEntity(
        id=0, kind=EntityKind.ROOT, locale="", name=root.name,
        text="", span=None, file_order_index=0)
    nodes[0] = root_entity

    next_id = 1
    file_ids: Dict[str, int] = {}
    per_file: Dict[str, List[ProjectEntity]] = {}
    for rel, entities, _text in cleaned:
        assigned = []
        for ent in entities:
            ent = source_parser.with_id(ent, next_id)
            nodes[next_id] = ent
            if ent.kind is EntityKind.FILE:
                file_ids[rel] = next_id
            assigned.append(ent)
            next_id += 1
        per_file[rel] = assigned

    edges: Set[Edge] = set()
    locale_to_id = {e.locale: e.id for e in nodes.values()
                    if e.kind is not EntityKind.ROOT}

    for rel, entities, _text in cleaned:
        fid = file_ids[rel]
        edges.add((0, EdgeType.PROJECT_FILE, fid))
        mod_depth = len(module_segments(rel))
        for ent in per_file[rel]:
            depth = len(ent.locale.split(".")) - mod_depth
            if ent.kind is EntityKind.GLOBAL_VAR:
                edges.add((fid, EdgeType.GLOBAL_VAR, ent.id))
                edges.add((ent.id, EdgeType.GLOBAL_VAR_REVERSE, fid))
            elif ent.kind is EntityKind.CLASS:
                edges.add((fid, EdgeType.CLASS, ent.id))
                edges.add((ent.id, EdgeType.CLASS_REVERSE, fid))
            elif ent.kind is EntityKind.FUNCTION and depth == 1:
                edges.add((fid, EdgeType.FUNCTION, ent.id))
                edges.add((ent.id, EdgeType.FUNCTION_REVERSE, fid))
            elif ent.kind is EntityKind.FUNCTION and depth == 2:
                owner = locale_to_id.get(ent.locale.rsplit(".", 1)[0])
                if owner is not None:
                    edges.add((owner, EdgeType.MEMBER_FUNCTION, ent.id))

    for rel, _entities, text in cleaned:
        fid = file_ids[rel]
        scan = scan_imports(text, root, rel)
        stats = {"local": scan.local, "non_local": scan.non_local,
                 "unresolved": scan.unresolved}
        for ref in scan.refs:
            target = locale_to_id.get(ref.module_path)
            target_node = nodes.get(target) if target is not None else None
            if target_node is None or target_node.kind is not EntityKind.FILE:
                stats["unresolved"] += 1
                stats["local"] -= 1
                continue
            if target != fid:
                edges.add((fid, EdgeType.IMPORT, target))
        report["files"][rel] = stats

    graph = ContextGraph(project_root=root.name, nodes=nodes, edges=edges)
    report["node_count"] = len(nodes)
    report["edge_count"] = len(edges)
    return graph, report


def build_graph(project_root, max_nodes: int = DEFAULT_MAX_NODES) -> ContextGraph:
    graph, _report = build_graph_with_report(project_root, max_nodes)
    return graph


def validate(graph: ContextGraph) -> List[str]:
    """Structural violations as human-readable strings; empty when sound."""
    violations: List[str] = []
    nodes = graph.nodes

    roots = [n for n in nodes.values() if n.kind is EntityKind.ROOT]
    if len(roots) != 1:
        violations.append(f"expected exactly one Root node, found {len(roots)}")
    if graph.root_id not in nodes:
        violations.append(f"root_id {graph.root_id} is not a node")
    elif nodes[graph.root_id].kind is not EntityKind.ROOT:
        violations.append(f"root_id {graph.root_id} is not a Root node")

    for node_id, node in nodes.items():
        if node.id != node_id:
            violations.append(f"node {node_id} carries mismatched id {node.id}")

    seen_locales: Dict[str, int] = {}
    for node in nodes.values():
        if node.kind is EntityKind.ROOT:
            continue
        if not node.locale:
            violations.append(f"node {node.id} ({node.kind.value}) has no locale")
            continue
        if node.locale in seen_locales:
            violations.append(
                f"locale {node.locale!r} names both node "
                f"{seen_locales[node.locale]} and node {node.id}")
        seen_locales[node.locale] = node.id

    for tail, edge_type, head in sorted(graph.edges,
                                        key=lambda e: (e[0], e[1].value, e[2])):
        label = f"{tail}-{edge_type.value}->{head}"
        if tail not in nodes or head not in nodes:
            violations.append(f"edge {label} references a missing node")
            continue
        want_tail, want_head = EDGE_ENDPOINTS[edge_type]
        if nodes[tail].kind is not want_tail:
            violations.append(
                f"edge {label}: tail is {nodes[tail].kind.value}, "
                f"expected {want_tail.value}")
        if nodes[head].kind is not want_head:
            violations.append(
                f"edge {label}: head is {nodes[head].kind.value}, "
                f"expected {want_head.value}")
        if edge_type in REVERSE_OF:
            if (head, REVERSE_OF[edge_type], tail) not in graph.edges:
                violations.append(f"edge {label} has no paired reverse edge")
        elif edge_type in FORWARD_OF:
            if (head, FORWARD_OF[edge_type], tail) not in graph.edges:
                violations.append(f"edge {label} has no paired forward edge")

    # Every File must hang off the root; members must have exactly one owner.
    file_edges = {e for e in graph.edges if e[1] is EdgeType.PROJECT_FILE}
    for node in nodes.values():
        if node.kind is EntityKind.FILE:
            owners = [e for e in file_edges if e[2] == node.id]
            if len(owners) != 1 or any(e[0] != graph.root_id for e in owners):
                violations.append(
                    f"File node {node.id} ({node.locale}) must have exactly "
                    f"one ProjectFile edge from the root")
        elif node.kind in (EntityKind.CLASS, EntityKind.GLOBAL_VAR,
                           EntityKind.FUNCTION):
            owning = [e for e in graph.edges
                      if e[2] == node.id and e[1] in (
                          EdgeType.CLASS, EdgeType.GLOBAL_VAR,
                          EdgeType.FUNCTION, EdgeType.MEMBER_FUNCTION)]
            if len(owning) != 1:
                violations.append(
                    f"node {node.id} ({node.locale}) has {len(owning)} "
                    f"ownership edges, expected 1")

    reachable = {graph.root_id}
    frontier = [graph.root_id]
    adjacency = graph.adjacency()
    while frontier:
        current = frontier.pop()
        for neighbor in adjacency.get(current, ()):
            if neighbor not in reachable:
                reachable.add(neighbor)
                frontier.append(neighbor)
    for node_id in nodes:
        if node_id not in reachable:
            violations.append(f"node {node_id} is unreachable from the root")

    return violations


def _span_to_json(span: Optional[SourceSpan]) -> Optional[dict]:
    if span is None:
        return None
    return {"file_path": span.file_path,
            "start_line": span.start_line, "start_col": span.start_col,
            "end_line": span.end_line, "end_col": span.end_col}


def serialize(graph: ContextGraph) -> bytes:
    """Deterministic JSON encoding of a graph."""
    payload = {
        "version": 1,
        "project_root": graph.project_root,
        "root_id": graph.root_id,
        "nodes": [
            {"id": n.id, "kind": n.kind.value, "locale": n.locale,
             "name": n.name, "text": n.text, "span": _span_to_json(n.span),
             "file_order_index": n.file_order_index}
            for n in sorted(graph.nodes.values(), key=lambda n: n.id)
        ],
        "edges": [
            {"tail": t, "type": et.value, "head": h}
            for t, et, h in sorted(graph.edges,
                                   key=lambda e: (e[0], e[1].value, e[2]))
        ],
    }
    return json.dumps(payload, sort_keys=True, ensure_ascii=False,
                      separators=(",", ":")).encode("utf-8")


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise FormatError(f"missing key {key!r}", position=where)
    return mapping[key]


def deserialize(data) -> ContextGraph:
    """Parse graph JSON back into a ContextGraph.

    Raises FormatError (with a position when available) on malformed
    input rather than letting KeyError or ValueError escape.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", position=exc.pos) from exc
    if not isinstance(payload, dict):
        raise FormatError("graph document must be a JSON object")

    nodes: Dict[int, ProjectEntity] = {}
    for i, raw in enumerate(_require(payload, "nodes", "document")):
        where = f"node {i}"
        if not isinstance(raw, dict):
            raise FormatError("node must be an object", position=where)
        kind_value = _require(raw, "kind", where)
        try:
            kind = EntityKind(kind_value)
        except ValueError:
            raise FormatError(f"unknown entity kind {kind_value!r}",
                              position=where) from None
        span_raw = raw.get("span")
        span = None
        if span_raw is not None:
            span = SourceSpan(
                file_path=_require(span_raw, "file_path", where),
                start_line=_require(span_raw, "start_line", where),
                start_col=_require(span_raw, "start_col", where),
                end_line=_require(span_raw, "end_line", where),
                end_col=_require(span_raw, "end_col", where))
        node = ProjectEntity(
            id=_require(raw, "id", where), kind=kind,
            locale=_require(raw, "locale", where),
            name=_require(raw, "name", where),
            text=_require(raw, "text", where),
            span=span,
            file_order_index=_require(raw, "file_order_index", where))
        if node.id in nodes:
            raise FormatError(f"duplicate node id {node.id}", position=where)
        nodes[node.id] = node

    edges: Set[Edge] = set()
    for i, raw in enumerate(_require(payload, "edges", "document")):
        where = f"edge {i}"
        if not isinstance(raw, dict):
            raise FormatError("edge must be an object", position=where)
        type_value = _require(raw, "type", where)
        try:
            edge_type = EdgeType(type_value)
        except ValueError:
            raise FormatError(f"unknown edge type {type_value!r}",
                              position=where) from None
        tail = _require(raw, "tail", where)
        head = _require(raw, "head", where)
        if tail not in nodes or head not in nodes:
            raise FormatError(f"edge references missing node {tail}->{head}",
                              position=where)
        edges.add((tail, edge_type, head))

    root_id = payload.get("root_id", 0)
    if root_id not in nodes or nodes[root_id].kind is not EntityKind.ROOT:
        raise FormatError(f"root_id {root_id} does not name a Root node")

    return ContextGraph(
        project_root=_require(payload, "project_root", "document"),
        nodes=nodes, edges=edges, root_id=root_id)
