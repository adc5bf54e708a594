"""Boundary homeomorphisms between two graphs of groups over the same graph.

Vertex homeomorphisms are restricted to generator substitutions that send
each generator to a generator or its inverse. Such a substitution acts on
cylinders of every depth, and when it carries each edge image to a
conjugate of the matching edge image it extends to an isomorphism of
fundamental groups. The tree map and the boundary map are read off that
isomorphism and tabulated on a ball.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..boundary import BoundaryModel, EdgeParabolic, TreeEnd, VertexPoint, points_near
from ..dynamics import translate_free_point
from ..freegrp import (
    FreeBoundaryPoint,
    ParabolicClass,
    PeriodicEnd,
    TruncatedEnd,
    Word,
    min_coset_rep,
    peripheral_of,
)
from ..gog import (
    EdgeLetter,
    GammaElement,
    GraphOfGroupsSpec,
    Parabolic,
    PathCalculus,
    edge_status,
    parabolize,
)
from ..tree import BassSerreTree, TreeVertex, tree_ball


@dataclass(frozen=True)
class HomeoRefusal:
    hypothesis: str  # "graph", "index", "peripheral", "unsupported"
    detail: str

    def __bool__(self) -> bool:
        return False


def _substitution(rank: int, images: dict[str, str] | None) -> tuple[Word, ...]:
    if images is None:
        return tuple(Word([k]) for k in range(1, rank + 1))
    out = []
    for k in range(1, rank + 1):
        key = str(Word([k]))
        if key not in images:
            raise ValueError(f"substitution misses generator {key}")
        out.append(Word.parse(images[key]))
    return tuple(out)


def substitute(images: tuple[Word, ...], w: Word) -> Word:
    out = Word()
    for x in w:
        img = images[abs(x) - 1]
        out = out * (img if x > 0 else img.inverse())
    return out


def _is_signed_permutation(images: tuple[Word, ...], rank: int) -> bool:
    return all(len(w) == 1 for w in images) and sorted(abs(w[0]) for w in images) == list(range(1, rank + 1))


@dataclass
class HomeoMapData:
    source: GraphOfGroupsSpec = field(repr=False)
    target: GraphOfGroupsSpec = field(repr=False)
    vertex_map: dict[str, str]
    edge_map: dict[str, str]
    subs: dict[str, tuple[Word, ...]]
    edge_images: dict[str, tuple[Word, Word]]  # conjugators at the two ends
    radius: int
    table: dict[TreeVertex, tuple[TreeVertex, Word]] = field(default_factory=dict, repr=False)
    rules: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._target_pc = PathCalculus(self.target)

    def __bool__(self) -> bool:
        return True

    # -- the isomorphism

    def map_element(self, x: GammaElement) -> GammaElement:
        """Image of a path from the base under the induced isomorphism."""
        items: list = []
        v = x.start
        for s in x.syllables:
            if isinstance(s, EdgeLetter):
                e = self.source.edge(s.edge)
                cv, cw = self.edge_images[s.edge]
                f = EdgeLetter(self.edge_map[s.edge], 1)
                seq = [cv, f, cw.inverse()]
                if s.sign < 0:
                    seq = [cw, f.reverse(), cv.inverse()]
                items.extend(z for z in seq if not isinstance(z, Word) or z)
                v = e.w if s.sign > 0 else e.v
            elif s:
                items.append(substitute(self.subs[v], s))
        return self._target_pc.normal_form(items, start=self.vertex_map[x.start])

    def phi(self, p: TreeVertex) -> tuple[TreeVertex, Word]:
        """Image vertex and the twist carrying traces at ``p`` to traces there."""
        hit = self.table.get(p)
        if hit is not None:
            return hit
        full = self.map_element(p.path)
        return TreeVertex(full.trimmed()), full.trailing

    def map_free(self, v: str, x: FreeBoundaryPoint) -> FreeBoundaryPoint:
        images = self.subs[v]
        spec_b = self.target.vertex(self.vertex_map[v])
        if isinstance(x, PeriodicEnd):
            return PeriodicEnd(substitute(images, x.prefix), substitute(images, x.period)).normalized()
        if isinstance(x, TruncatedEnd):
            return TruncatedEnd(substitute(images, x.prefix))
        r = self.source.vertex(v).root(x.peripheral_index)
        i, s, _sign, _n = peripheral_of(spec_b, substitute(images, r))
        return ParabolicClass(min_coset_rep(substitute(images, x.coset_rep) * s, spec_b.root(i)), i)

    def image(self, model_b: BoundaryModel, p):
        if isinstance(p, TreeEnd):
            if p.exact:
                return model_b.tree_end(self.map_element(p.gamma))
            q, _ = self.phi(p.path)
            return model_b.truncated_end(q)
        v, x = (p.vertex, p.point) if isinstance(p, VertexPoint) else (p.vertex, p.cls)
        q, h = self.phi(v)
        y = self.map_free(v.orbit, x)
        spec = model_b.vspec(q)
        return model_b.glue(q, translate_free_point(h, y, spec.root))


def _indices(spec: GraphOfGroupsSpec, e) -> tuple[int, int]:
    sv, sw = edge_status(spec, e)
    assert isinstance(sv, Parabolic) and isinstance(sw, Parabolic)
    return sv.index, sw.index


def build_homeo(a: GraphOfGroupsSpec, b: GraphOfGroupsSpec, vertex_homeos: dict | None = None,
                edge_map: dict[str, str] | None = None, radius: int = 2) -> HomeoMapData | HomeoRefusal:
    """Check the hypotheses and build the tree and boundary maps, or refuse.

    ``vertex_homeos`` maps a source vertex id to ``(target id, {generator: image})``;
    the default is the identity on ids and generators."""
    a, b = parabolize(a), parabolize(b)
    if vertex_homeos is None:
        vertex_homeos = {v: (v, None) for v in a.vertex_ids}
    vmap = {v: t for v, (t, _) in vertex_homeos.items()}
    emap = dict(edge_map) if edge_map is not None else {e.id: e.id for e in a.edges}
    # the underlying graphs must agree
    if sorted(vmap) != sorted(a.vertex_ids) or sorted(vmap.values()) != sorted(b.vertex_ids):
        return HomeoRefusal("graph", "vertex map is not a bijection of vertex sets")
    b_edges = {e.id for e in b.edges}
    if sorted(emap) != sorted(e.id for e in a.edges) or sorted(emap.values()) != sorted(b_edges):
        return HomeoRefusal("graph", "edge map is not a bijection of edge sets")
    for e in a.edges:
        eb = b.edge(emap[e.id])
        if (vmap[e.v], vmap[e.w]) != (eb.v, eb.w):
            return HomeoRefusal("graph", f"edge {e.id} does not match {eb.id}")
    # same finite index at every edge end
    for e in a.edges:
        eb = b.edge(emap[e.id])
        ia, ib = _indices(a, e), _indices(b, eb)
        for side, x, y in (("v", ia[0], ib[0]), ("w", ia[1], ib[1])):
            if x != y:
                return HomeoRefusal("index", f"edge {e.id} end {side}: index {x} against {y}")
    # vertex homeomorphisms carry edge classes onto edge classes
    subs = {}
    for v, (t, images) in vertex_homeos.items():
        va, vb = a.vertex(v), b.vertex(t)
        if va.rank != vb.rank:
            return HomeoRefusal("peripheral", f"vertex {v}: rank {va.rank} against {vb.rank}")
        try:
            sub = _substitution(va.rank, images)
        except ValueError as exc:
            return HomeoRefusal("unsupported", f"vertex {v}: {exc}")
        if not _is_signed_permutation(sub, va.rank):
            return HomeoRefusal("unsupported", f"vertex {v}: only signed generator permutations are supported")
        hit = [peripheral_of(vb, substitute(sub, p.root)) for p in va.peripherals]
        if any(h is None for h in hit) or len({h[0] for h in hit}) != len(vb.peripherals) \
                or len(va.peripherals) != len(vb.peripherals):
            return HomeoRefusal("peripheral", f"vertex {v}: peripheral structure is not preserved")
        subs[v] = sub
    edge_images = {}
    for e in a.edges:
        eb = b.edge(emap[e.id])
        conj, signs = [], []
        for end, img, img_b in ((e.v, e.image_v, eb.image_v), (e.w, e.image_w, eb.image_w)):
            vb = b.vertex(vmap[end])
            x = peripheral_of(vb, substitute(subs[end], img))
            y = peripheral_of(vb, img_b)
            if x[0] != y[0] or x[3] != y[3]:
                return HomeoRefusal("peripheral", f"edge {e.id}: image at {end} is not sent to the matching class")
            conj.append(x[1] * y[1].inverse())
            signs.append(x[2] * y[2])
        if signs[0] != signs[1]:
            return HomeoRefusal("unsupported", f"edge {e.id}: substitutions reverse one end only")
        edge_images[e.id] = (conj[0], conj[1])
    if vmap[a.base] != b.base:
        return HomeoRefusal("unsupported", "base vertices do not correspond")
    out = HomeoMapData(a, b, vmap, emap, subs, edge_images, radius)
    for v in a.vertex_ids:
        out.rules.append(f"{v}->{vmap[v]}: " + ", ".join(
            f"{Word([k + 1])}->{w}" for k, w in enumerate(subs[v])))
    for e in a.edges:
        cv, cw = edge_images[e.id]
        out.rules.append(f">{e.id} -> {cv or '1'} >{emap[e.id]} {cw.inverse() or '1'}")
    ball = tree_ball(BassSerreTree(a), radius=radius)
    for p in ball.vertices:
        out.table[p] = out.phi(p)
    return out


def corrupted(h: HomeoMapData) -> HomeoMapData:
    """A copy whose table swaps the images of two vertices next to the base (negative control)."""
    roots = [p for p in h.table if p.depth == 1]
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            if roots[i].orbit == roots[j].orbit:
                table = dict(h.table)
                table[roots[i]], table[roots[j]] = h.table[roots[j]], h.table[roots[i]]
                return HomeoMapData(h.source, h.target, h.vertex_map, h.edge_map, h.subs,
                                    h.edge_images, h.radius, table, h.rules + ["corrupted"])
    raise ValueError("no pair of vertices to swap")


@dataclass
class HomeoCheck:
    checked: int = 0
    passed: int = 0
    tree_failures: list = field(default_factory=list)
    failures: list = field(default_factory=list)  # (point, witness) pairs
    class_failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.failures or self.tree_failures or self.class_failures)


def check_homeo(h: HomeoMapData, model_a: BoundaryModel, model_b: BoundaryModel, samples, d: int = 3,
                rng: random.Random | None = None, near: int = 12, extra: int = 3) -> HomeoCheck:
    """Finite-resolution continuity: for each sample find V with f(V) inside W."""
    rng = random.Random(0) if rng is None else rng
    rep = HomeoCheck()
    # the table must be a graph map on the ball
    for p, (q, _) in h.table.items():
        if p.depth == 0:
            continue
        par = model_a.tree.parent(p)
        if par in h.table and model_b.tree.distance(h.table[par][0], q) != 1:
            rep.tree_failures.append((p, q))
    for xi in samples:
        fx = h.image(model_b, xi)
        if isinstance(xi, EdgeParabolic) and not isinstance(fx, EdgeParabolic):
            rep.class_failures.append((xi, fx))
        W = model_b.basic_neighborhood(fx, d)
        rep.checked += 1
        witness = None
        # twists by peripheral elements shorten cylinders by their length
        slack = extra
        if not isinstance(xi, TreeEnd):
            slack += max(len(h.phi(v)[1]) for v in model_a.domain(xi, 2).vertices)
        for n in range(d, d + slack + 1):
            V = model_a.basic_neighborhood(xi, n)
            pts = [z for z in points_near(model_a, xi, rng, near, depth=n) if model_a.in_neighborhood(z, V) is True]
            bad = [z for z in pts if model_b.in_neighborhood(h.image(model_b, z), W) is False]
            if not bad:
                witness = None
                break
            witness = bad[0]
        if witness is None:
            rep.passed += 1
        else:
            rep.failures.append((xi, witness))
    return rep
