"""Import-anchored neighborhood retrieval over a context graph.

For each local import statement of a query file, the referenced node is
located in the graph and everything within k hops of it is collected.
Reverse membership edges participate like any other edge, which is what
lets a two-hop walk reach the siblings of an imported entity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .errors import NodeNotFound
from .import_resolver import ImportRef, locate_node, refs_against_graph

DEFAULT_K = 2


@dataclass(frozen=True)
class RetrievedContext:
    """Ordered node ids plus the anchors that produced them.

    ``missing`` holds refs that looked project-local but had no node to
    land on (typically files skipped while the graph was built).
    """

    entities: Tuple[int, ...]
    anchors: Tuple[Tuple[ImportRef, int], ...]
    k: int
    missing: Tuple[ImportRef, ...] = ()


def _discovery_order(adjacency: Dict[int, Tuple[int, ...]],
                     start: int, k: int) -> List[int]:
    """Nodes within k hops of start, in first-discovery order.

    A plain visited-set DFS can first reach a node near the depth limit
    and never revisit it on a shorter path, silently cutting off its
    neighbors.  Tracking the best known depth and re-expanding on
    improvement keeps the result equal to the true distance-k ball.
    """
    best = {start: 0}
    order = [start]
    stack = [(start, 0)]
    while stack:
        node, depth = stack.pop()
        if depth > best.get(node, depth):
            continue
        if depth >= k:
            continue
        for neighbor in reversed(adjacency.get(node, ())):
            next_depth = depth + 1
            if next_depth < best.get(neighbor, k + 1):
                if neighbor not in best:
                    order.append(neighbor)
                best[neighbor] = next_depth
                stack.append((neighbor, next_depth))
    return order


def dfs_k_hop(graph, start_id: int, k: int) -> Set[int]:
    """All node ids reachable from ``start_id`` in at most k hops."""
    return set(_discovery_order(graph.adjacency(), start_id, k))


def _file_of(graph, node_id: int) -> Optional[str]:
    span = graph.nodes[node_id].span
    return None if span is None else span.file_path


def reorder_nodes(graph, node_ids: Sequence[int]) -> List[int]:
    """Group nodes by file, keeping files in first-appearance order and
    entities of one file in source order."""
    rank: Dict[Optional[str], int] = {}
    for node_id in node_ids:
        path = _file_of(graph, node_id)
        if path not in rank:
            rank[path] = len(rank)
    return sorted(node_ids,
                  key=lambda nid: (rank[_file_of(graph, nid)],
                                   graph.nodes[nid].file_order_index))


def retrieve_context(graph, source: str, k: int = DEFAULT_K,
                     file_path: Optional[str] = None,
                     include_function_bodies: bool = False
                     ) -> RetrievedContext:
    """Retrieve the k-hop context for a query file's source.

    ``file_path`` is the query file's project-relative path when known;
    it allows relative imports to resolve and keeps the file's own
    entities out of its context.
    """
    refs, missing = refs_against_graph(source, graph, file_path,
                                       include_function_bodies)
    adjacency = graph.adjacency()
    missing_refs: List[ImportRef] = list(missing)
    anchors: List[Tuple[ImportRef, int]] = []
    seen: Set[int] = set()
    ordered: List[int] = []

    for ref in refs:
        try:
            anchor = locate_node(graph, ref)
        except NodeNotFound:
            missing_refs.append(ref)
            continue
        anchors.append((ref, anchor))
        for node_id in _discovery_order(adjacency, anchor, k):
            if node_id not in seen:
                seen.add(node_id)
                ordered.append(node_id)

    exclude = {graph.root_id}
    if file_path is not None:
        for node in graph.nodes.values():
            if node.span is not None and node.span.file_path == file_path:
                exclude.add(node.id)

    kept = [nid for nid in ordered if nid not in exclude]
    return RetrievedContext(
        entities=tuple(reorder_nodes(graph, kept)),
        anchors=tuple(anchors),
        k=k,
        missing=tuple(missing_refs))
