"""Connected components of the boundary with one edge class removed.

The glued boundary is approximated on a finite piece of the tree: the
domain vertices of the removed class within distance ``R`` (hubs) plus
one collar of neighbouring vertices outside the domain. Each vertex
contributes its depth-``d`` cylinders; cylinders are joined when a
parabolic class has its two ends in them, and across a tree edge when
they hold the two traces of its edge class. The removed class deletes
the cylinders holding its traces at every hub.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..boundary import BoundaryModel, EdgeParabolic
from ..freegrp import VertexGroupSpec, crossing_cached, point_prefixes, reduced_words
from ..tree import BudgetExceeded, TreeVertex
from .scenario import Scenario


def collar_radius(d: int) -> int:
    """Hub radius used at cylinder depth ``d``."""
    return max(0, d - 2)


@dataclass
class ComponentCount:
    depth: int
    radius: int
    count: int
    hubs: int
    vertices: int
    nodes: int


@dataclass
class ComponentReport:
    scenario: str
    removed: str
    counts: list[ComponentCount] = field(default_factory=list)

    @property
    def by_depth(self) -> dict[int, int]:
        return {c.depth: c.count for c in self.counts}

    @property
    def verdict(self) -> str:
        """'stable:<n>', 'increasing' or 'unstable' over the depths run."""
        vals = [c.count for c in self.counts]
        if vals and all(v == vals[0] for v in vals):
            return f"stable:{vals[0]}"
        if all(a < b for a, b in zip(vals, vals[1:])):
            return "increasing"
        return "unstable"

    def rows(self) -> list[tuple]:
        return [(c.depth, c.radius, c.count, c.hubs, c.vertices, c.nodes) for c in self.counts]


class _VertexTables:
    """Per vertex group: cylinder index and crossing-class index pairs at one depth."""

    def __init__(self, spec: VertexGroupSpec, d: int):
        for p in spec.peripherals:
            if len(p.root) > 2 * d + 1:
                raise ValueError(f"depth {d} too small to resolve peripheral period {p.root}")
        self.spec = spec
        self.words = reduced_words(spec.rank, d)
        self.index = {w: k for k, w in enumerate(self.words)}
        pairs = [(self.index[x], self.index[y]) for _c, x, y in crossing_cached(spec, d)]
        self.pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        self.d = d

    def cells(self, cls) -> list[int]:
        return [self.index[w] for w in point_prefixes(self.spec, cls, self.d)]


def default_removed(model: BoundaryModel) -> EdgeParabolic | None:
    """The edge class of the first edge at the base vertex, or None without edges."""
    nbrs, _ = model.tree.neighbors(model.tree.root)
    if not nbrs:
        return None
    return model.edge_point(model.tree.root, nbrs[0])


def count_components(model: BoundaryModel, x: EdgeParabolic | None, d: int, radius: int | None = None,
                     budget: int = 200_000) -> ComponentCount:
    if d < 2:
        raise ValueError("depth must be at least 2")
    tree = model.tree
    R = collar_radius(d) if radius is None else radius
    if x is None:
        hubs = [tree.root]
        traces: dict[TreeVertex, object] = {}
        hub_edges: list[tuple[TreeVertex, TreeVertex]] = []
    else:
        view = model.domain(x, R)
        hubs = [v for v in view.vertices if view.depth_in_domain[v] <= R]
        traces = {v: view.classes[v] for v in hubs}
        hub_set = set(hubs)
        hub_edges = [(u, w) for u in hubs for w in view.adjacency[u] if w in hub_set and hubs.index(u) < hubs.index(w)]
    hub_set = set(hubs)
    collar_edges = []
    collar: list[TreeVertex] = []
    seen = set(hubs)
    for u in hubs:
        for w in tree.neighbors(u)[0]:
            if w in hub_set:
                continue
            cu, _ = tree.edge_classes(u, w)
            if u in traces and cu == traces[u]:
                continue  # domain continues beyond the hub radius
            collar_edges.append((u, w))
            if w not in seen:
                seen.add(w)
                collar.append(w)
    verts = hubs + collar
    tables: dict[str, _VertexTables] = {}
    offset: dict[TreeVertex, int] = {}
    n = 0
    for v in verts:
        if v.orbit not in tables:
            tables[v.orbit] = _VertexTables(model.vspec(v), d)
        offset[v] = n
        n += len(tables[v.orbit].words)
        if n > budget:
            raise BudgetExceeded(f"{n} cylinder nodes exceed budget {budget}")
    rows = [tables[v.orbit].pairs + offset[v] for v in verts]
    links = []
    for u, w in hub_edges + collar_edges:
        cu, cw = tree.edge_classes(u, w)
        a = [offset[u] + k for k in tables[u.orbit].cells(cu)]
        b = [offset[w] + k for k in tables[w.orbit].cells(cw)]
        links.extend((a[0], k) for k in a[1:] + b)
    if links:
        rows.append(np.array(links, dtype=np.int64))
    edges = np.concatenate(rows) if rows else np.zeros((0, 2), dtype=np.int64)
    keep = np.ones(n, dtype=bool)
    for v, cls in traces.items():
        for k in tables[v.orbit].cells(cls):
            keep[offset[v] + k] = False
    edges = edges[keep[edges[:, 0]] & keep[edges[:, 1]]]
    g = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    count = len(np.unique(labels[keep]))
    return ComponentCount(d, R, count, len(hubs), len(verts), n)


def run_components(scenario: Scenario, depths=None, removed: EdgeParabolic | None | str = "default",
                   radius: int | None = None, budget: int | None = None) -> ComponentReport:
    model = BoundaryModel(scenario.spec)
    x = default_removed(model) if removed == "default" else removed
    depths = scenario.depths if depths is None else list(depths)
    budget = scenario.budget if budget is None else budget
    report = ComponentReport(scenario.name, "none" if x is None else str(x))
    for d in depths:
        report.counts.append(count_components(model, x, d, radius, budget))
    return report


def expectation_met(report: ComponentReport, expect) -> bool | None:
    """Compare with a scenario's declared expectation; None when nothing is declared."""
    if expect is None:
        return None
    if expect == "increasing":
        return report.verdict == "increasing"
    got = report.by_depth
    return all(got.get(int(k)) == int(v) for k, v in expect.items() if int(k) in got)
