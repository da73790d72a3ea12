"""Word taxonomy, lexicon, and cell-graph construction (taxonomy-based, grid, top-left/bottom-right)."""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from .table import GridTable

Pos = tuple[int, int]
Edge = tuple[Pos, Pos]

DEFAULT_ETA = 3
DEFAULT_EPS_DEPTH = 2


class TaxonomyError(ValueError):
    pass


@dataclass(frozen=True)
class Taxonomy:
    parent: dict[str, str]
    root: str
    depth: dict[str, int]

    @property
    def nodes(self) -> frozenset[str]:
        return frozenset(self.depth)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str]]) -> "Taxonomy":
        parent: dict[str, str] = {}
        for child, par in edges:
            if child == par:
                raise TaxonomyError(f"cycle: {child!r} is its own parent")
            if child in parent and parent[child] != par:
                raise TaxonomyError(f"{child!r} has multiple parents ({parent[child]!r}, {par!r})")
            parent[child] = par
        roots = {p for p in parent.values() if p not in parent}
        if not parent:
            raise TaxonomyError("taxonomy has no edges")
        if len(roots) != 1:
            if not roots:
                raise TaxonomyError("cycle: every node has a parent, so there is no root")
            raise TaxonomyError(f"multiple roots: {sorted(roots)}")
        (root,) = roots
        depth = {root: 0}
        for node in parent:
            chain = []
            cur = node
            while cur not in depth:
                chain.append(cur)
                cur = parent.get(cur)
                if cur is None or len(chain) > len(parent):
                    raise TaxonomyError(f"cycle through {node!r}")
            base = depth[cur]
            for k, n in enumerate(reversed(chain), start=1):
                depth[n] = base + k
        return cls(parent, root, depth)

    def check(self, node: str) -> None:
        if node not in self.depth:
            raise KeyError(f"unknown taxonomy node {node!r}")

    def ancestor_at(self, node: str, level: int) -> str:
        """Ancestor-or-self of ``node`` at depth ``level`` (``level <= depth(node)``)."""
        cur = node
        for _ in range(self.depth[node] - level):
            cur = self.parent[cur]
        return cur

    def lca(self, a: str, b: str) -> str:
        self.check(a)
        self.check(b)
        da, db = self.depth[a], self.depth[b]
        if da > db:
            a = self.ancestor_at(a, db)
        elif db > da:
            b = self.ancestor_at(b, da)
        while a != b:
            a, b = self.parent[a], self.parent[b]
        return a


def _data_lines(text: str) -> Iterable[tuple[int, str]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_taxonomy(text: str) -> Taxonomy:
    edges = []
    for lineno, line in _data_lines(text):
        parts = [p.strip() for p in line.split("\t")]
        if len(parts) != 2 or not all(parts):
            raise TaxonomyError(f"line {lineno}: expected 'child<TAB>parent', got {line!r}")
        edges.append((parts[0], parts[1]))
    return Taxonomy.from_edges(edges)


def load_taxonomy(path: str | Path) -> Taxonomy:
    return parse_taxonomy(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Lexicon:
    synsets: dict[str, tuple[str, ...]]

    def validate(self, taxonomy: Taxonomy) -> "Lexicon":
        for word, nodes in self.synsets.items():
            if not nodes:
                raise TaxonomyError(f"lexicon entry {word!r} has no nodes")
            for node in nodes:
                if node not in taxonomy.depth:
                    raise TaxonomyError(f"lexicon entry {word!r} refers to unknown node {node!r}")
        return self


def parse_lexicon(text: str, taxonomy: Taxonomy | None = None) -> Lexicon:
    synsets = {}
    for lineno, line in _data_lines(text):
        word, sep, nodes = line.partition("\t")
        if not sep:
            raise TaxonomyError(f"line {lineno}: expected 'word<TAB>node1,node2,...'")
        synsets[word.strip().lower()] = tuple(n.strip() for n in nodes.split(",") if n.strip())
    lex = Lexicon(synsets)
    return lex.validate(taxonomy) if taxonomy is not None else lex


def load_lexicon(path: str | Path, taxonomy: Taxonomy | None = None) -> Lexicon:
    return parse_lexicon(Path(path).read_text(encoding="utf-8"), taxonomy)


def demo_taxonomy() -> Taxonomy:
    return parse_taxonomy(resources.files("tabularnet.data").joinpath("demo_taxonomy.tsv").read_text())


def demo_lexicon(taxonomy: Taxonomy | None = None) -> Lexicon:
    text = resources.files("tabularnet.data").joinpath("demo_lexicon.tsv").read_text()
    return parse_lexicon(text, taxonomy or demo_taxonomy())


_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def word_set(text: str, lexicon: Lexicon, eta: int = DEFAULT_ETA) -> list[str]:
    """Up to ``eta`` leading synset nodes for every known token, in token order."""
    if eta < 1:
        raise ValueError("eta must be >= 1")
    out: list[str] = []
    for token in tokenize(text):
        nodes = lexicon.synsets.get(token)
        if nodes:
            out.extend(nodes[:eta])
    return out


# ---------------------------------------------------------------------------
# Graphs


@dataclass(frozen=True)
class CellGraph:
    table_id: str
    n_rows: int
    n_cols: int
    directed: bool
    edges: frozenset[Edge]
    kind: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for u, v in self.edges:
            for r, c in (u, v):
                if not (0 <= r < self.n_rows and 0 <= c < self.n_cols):
                    raise ValueError(f"edge endpoint ({r},{c}) outside {self.n_rows}x{self.n_cols} grid")
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not self.directed and u > v:
                raise ValueError(f"undirected edge {(u, v)} not canonically ordered")

    def adjacency(self) -> dict[Pos, list[Pos]]:
        """Incoming neighbours per cell; undirected edges count in both directions."""
        adj: dict[Pos, list[Pos]] = defaultdict(list)
        for u, v in sorted(self.edges):
            adj[v].append(u)
            if not self.directed:
                adj[u].append(v)
        return dict(adj)

    def export(self) -> str:
        params = " ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        lines = [f"# graph={self.kind} table={self.table_id} directed={int(self.directed)} "
                 f"shape={self.n_rows}x{self.n_cols} {params}".rstrip()]
        lines += [f"{u[0]},{u[1]}\t{v[0]},{v[1]}" for u, v in sorted(self.edges)]
        return "\n".join(lines) + "\n"


def _undirected(pairs: Iterable[Edge]) -> frozenset[Edge]:
    return frozenset((u, v) if u < v else (v, u) for u, v in pairs)


def empty_graph(table: GridTable) -> CellGraph:
    return CellGraph(table.id, table.n_rows, table.n_cols, False, frozenset(), "none")


def build_wordnet_graph(
    table: GridTable,
    taxonomy: Taxonomy,
    lexicon: Lexicon,
    eta: int = DEFAULT_ETA,
    eps_depth: int = DEFAULT_EPS_DEPTH,
    strict: bool = False,
) -> CellGraph:
    """Link cells holding taxonomy nodes on one level whose common ancestor is at most
    ``eps_depth`` levels up (fewer than ``eps_depth`` levels when ``strict``).

    Two nodes at depth k satisfy the gap condition exactly when they share their ancestor at
    depth ``max(k - gap, 0)``, so cells are bucketed by that (depth, ancestor) key.
    """
    if eps_depth < 0:
        raise ValueError("eps_depth must be >= 0")
    gap = eps_depth - 1 if strict else eps_depth
    groups = table.origins()
    buckets: dict[tuple[int, str], set[Pos]] = defaultdict(set)
    if gap >= 0:
        for origin in groups:
            for node in word_set(table[origin].text, lexicon, eta):
                k = taxonomy.depth[node]
                buckets[k, taxonomy.ancestor_at(node, max(k - gap, 0))].add(origin)
    linked: set[Edge] = set()
    for members in buckets.values():
        ordered = sorted(members)
        for a in range(len(ordered)):
            for b in range(a + 1, len(ordered)):
                linked.add((ordered[a], ordered[b]))
    edges = _undirected(
        (p, q) for a, b in linked for p in groups[a] for q in groups[b]
    )
    return CellGraph(table.id, table.n_rows, table.n_cols, False, edges, "wordnet",
                     {"eta": eta, "eps_depth": eps_depth, "strict": int(strict)})


def build_grid_graph(table: GridTable) -> CellGraph:
    edges = set()
    for r, c in table.positions():
        if r + 1 < table.n_rows:
            edges.add(((r, c), (r + 1, c)))
        if c + 1 < table.n_cols:
            edges.add(((r, c), (r, c + 1)))
    return CellGraph(table.id, table.n_rows, table.n_cols, False, frozenset(edges), "grid")


def build_tlbr_graph(table: GridTable) -> CellGraph:
    grid = build_grid_graph(table)
    # canonical grid edges already point rightward or downward
    return CellGraph(table.id, table.n_rows, table.n_cols, True, grid.edges, "tlbr")


GRAPH_KINDS = ("wordnet", "grid", "tlbr", "none")


def build_graph(
    kind: str,
    table: GridTable,
    taxonomy: Taxonomy | None = None,
    lexicon: Lexicon | None = None,
    eta: int = DEFAULT_ETA,
    eps_depth: int = DEFAULT_EPS_DEPTH,
    strict: bool = False,
) -> CellGraph:
    if kind == "wordnet":
        if taxonomy is None or lexicon is None:
            raise ValueError("wordnet graph needs a taxonomy and a lexicon")
        return build_wordnet_graph(table, taxonomy, lexicon, eta, eps_depth, strict)
    if kind == "grid":
        return build_grid_graph(table)
    if kind == "tlbr":
        return build_tlbr_graph(table)
    if kind == "none":
        return empty_graph(table)
    raise ValueError(f"unknown graph kind {kind!r}; choose from {GRAPH_KINDS}")
