"""Generators and stubs shared across the test suite.

Nothing here calls into package internals beyond the public dataclasses,
so oracle computations in the tests stay independent of the code under
test.
"""

import random
from pathlib import Path

from crossctx.source_parser import EntityKind, ProjectEntity, SourceSpan


class AdjacencyStub:
    """Minimal graph double for walk functions: just an adjacency map."""

    def __init__(self, adjacency):
        self._adjacency = adjacency

    def adjacency(self):
        return self._adjacency


class EntityBag:
    """Graph double that only serves entities by id."""

    def __init__(self, entities, project_root="bag"):
        self.nodes = {e.id: e for e in entities}
        self.project_root = project_root

    def entity(self, node_id):
        return self.nodes[node_id]


def random_digraph(rng, max_nodes=200):
    """(n, edges, adjacency) for a random directed graph."""
    n = rng.randint(1, max_nodes)
    m = rng.randint(0, 4 * n)
    edges = set()
    for _ in range(m):
        edges.add((rng.randrange(n), rng.randrange(n)))
    adjacency = {}
    for i in range(n):
        adjacency[i] = tuple(sorted(h for (t, h) in edges if t == i))
    return n, edges, adjacency


def matrix_reachable(n, edges, start, k):
    """Distance-at-most-k reachability via adjacency matrix powers."""
    import numpy as np

    matrix = np.zeros((n, n), dtype=np.int64)
    for tail, head in edges:
        matrix[tail][head] = 1
    reach = np.zeros(n, dtype=np.int64)
    reach[start] = 1
    frontier = reach.copy()
    for _ in range(k):
        frontier = (frontier @ matrix > 0).astype(np.int64)
        reach |= frontier
    return {i for i in range(n) if reach[i]}


_WORDS = ["alpha", "beta", "naïve", "Δdelta", "value", "config", "x", "handler",
          "pérf", "total", "run", "_private", "CamelCase", "n0"]
_PUNCT = list("()[]{}:.,=+-*/<>%&|^~;@\"'\\")


def random_source_text(rng):
    """Messy multi-line text: unicode words, punctuation runs, embedded
    [SUM] literals, odd indentation, the occasional very long line."""
    lines = []
    for _ in range(rng.randint(0, 12)):
        count = rng.choice([0, 1, 3, 8, 20, 60])
        parts = []
        for _ in range(count):
            roll = rng.random()
            if roll < 0.55:
                parts.append(rng.choice(_WORDS))
            elif roll < 0.85:
                parts.append(rng.choice(_PUNCT))
            elif roll < 0.93:
                parts.append(str(rng.randrange(10_000)))
            else:
                parts.append("[SUM]")
        joiner = rng.choice([" ", " ", ""])
        indent = rng.choice(["", "    ", "\t", "  "])
        lines.append(indent + joiner.join(parts))
    return "\n".join(lines)


def random_entity(rng, node_id):
    kind = rng.choice([EntityKind.FILE, EntityKind.CLASS,
                       EntityKind.FUNCTION, EntityKind.GLOBAL_VAR])
    depth = rng.randint(1, 3)
    locale = ".".join(rng.choice(_WORDS).strip("_") or "seg"
                      for _ in range(depth)) + f".n{node_id}"
    return ProjectEntity(
        id=node_id, kind=kind, locale=locale, name=f"n{node_id}",
        text=random_source_text(rng),
        span=SourceSpan("gen.py", 1, 0, 1, 0),
        file_order_index=node_id)


def synth_project(root: Path, files: int = 100, seed: int = 7) -> None:
    """Write a synthetic project: ~15 entities per file, cross imports,
    and call sites that go through those imports."""
    rng = random.Random(seed)
    root.mkdir(parents=True, exist_ok=True)
    names = [f"mod{i:03d}" for i in range(files)]
    for i, name in enumerate(names):
        lines = [f'"""Synthetic module {name}."""', ""]
        targets = rng.sample(names[:i], k=min(2, i))
        for target in targets:
            lines.append(f"import {target}")
        if targets:
            lines.append("")
        for v in range(3):
            lines.append(f"LIMIT_{v} = {rng.randrange(1000)}")
        lines.append("")
        for c in range(2):
            lines.extend([
                f"class Node{c}:",
                f'    """Synthetic class {c}."""',
                "",
                "    def __init__(self, value):",
                "        self.value = value",
                "",
                "    def scaled(self):",
                f"        return self.value * LIMIT_{c}",
                "",
                "",
            ])
        for f in range(5):
            if targets and f == 0:
                lines.extend([
                    f"def use_{f}(x):",
                    f"    return {targets[0]}.use_1(x)",
                    "",
                    "",
                ])
            else:
                lines.extend([
                    f"def use_{f}(x):",
                    f"    return x + {f}",
                    "",
                    "",
                ])
        (root / f"{name}.py").write_text("\n".join(lines) + "\n",
                                         encoding="utf-8")
