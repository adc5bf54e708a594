"""Group elements acting on the boundary: classification, probes and witnesses.

Every certificate here is empirical: a finite sample of points, a finite
stretch of a sequence, and cylinders of a fixed depth.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

from .boundary import (
    BoundaryModel,
    BoundaryPoint,
    EdgeParabolic,
    TreeEnd,
    Undecidable,
    cylinders_of,
    random_periodic_end,
    random_word,
)
from .freegrp import (
    FreeBoundaryPoint,
    ParabolicClass,
    PeriodicEnd,
    StallingsGraph,
    TruncatedEnd,
    Word,
    common_prefix_length,
    end_directions,
    min_coset_rep,
    peripheral_of,
)
from .gog import EdgeLetter, GammaElement
from .tree import TreeVertex, domain_quotient


# --------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class EllipticOnTree:
    vertex: TreeVertex
    inner: str  # "loxodromic-in-X_v" or "parabolic-in-X_v"
    inner_word: Word

    @property
    def translation_length(self) -> int:
        return 0


@dataclass(frozen=True)
class LoxodromicOnTree:
    translation_length: int
    axis: tuple  # one period of axis vertices


@dataclass(frozen=True)
class EdgeParabolicFixing:
    point: EdgeParabolic

    @property
    def translation_length(self) -> int:
        return 0


ElementClass = EllipticOnTree | LoxodromicOnTree | EdgeParabolicFixing


def fixed_vertex(model: BoundaryModel, g: GammaElement) -> tuple[TreeVertex, Word]:
    """A vertex fixed by an elliptic element and the element read in its vertex group."""
    t = model.tree
    root = t.root
    geo = t.geodesic(root, t.act(g, root))
    v = geo[(len(geo) - 1) // 2]
    image, h = t.act_with_trace(g, v)
    if image != v:
        raise ValueError(f"{g} does not fix the midpoint; it is not elliptic")
    return v, h


def classify(model: BoundaryModel, g: GammaElement) -> ElementClass:
    if g.is_identity():
        raise ValueError("identity has no dynamics type")
    ell = model.translation_length(g)
    if ell > 0:
        t = model.tree
        d1 = t.distance(t.root, t.act(g, t.root))
        end = TreeEnd(model, gamma=g, ell=ell, offset=(d1 - ell) // 2)
        ray = model.ray(end, end.offset + ell)
        return LoxodromicOnTree(ell, tuple(ray[end.offset:]))
    v, h = fixed_vertex(model, g)
    hit = peripheral_of(model.vspec(v), h)
    if hit is None:
        return EllipticOnTree(v, "loxodromic-in-X_v", h)
    i, s, _sign, _n = hit
    p = model.glue(v, ParabolicClass(min_coset_rep(s, model.vspec(v).root(i)), i))
    if isinstance(p, EdgeParabolic):
        return EdgeParabolicFixing(p)
    return EllipticOnTree(v, "parabolic-in-X_v", h)


# --------------------------------------------------------------------------
# action


def translate_free_point(h: Word, x: FreeBoundaryPoint, root_of) -> FreeBoundaryPoint:
    if isinstance(x, PeriodicEnd):
        return PeriodicEnd(h * x.prefix, x.period).normalized()
    if isinstance(x, ParabolicClass):
        return ParabolicClass(min_coset_rep(h * x.coset_rep, root_of(x.peripheral_index)), x.peripheral_index)
    w = h * x.prefix
    cancelled = (len(h) + len(x.prefix) - len(w)) // 2
    return TruncatedEnd(w if cancelled < len(x.prefix) else Word())


def act(model: BoundaryModel, g: GammaElement, p: BoundaryPoint) -> BoundaryPoint:
    if g.is_identity():
        return p
    t = model.tree
    if isinstance(p, TreeEnd):
        if p.exact:
            # folding is invariant under the action, so no refold is needed
            conj = model.pc.multiply(model.pc.multiply(g, p.gamma), model.pc.invert(g))
            d1 = t.distance(t.root, t.act(conj, t.root))
            return TreeEnd(model, gamma=conj, ell=p.ell, offset=(d1 - p.ell) // 2)
        image = t.act(g, p.path)
        shift = t.distance(t.root, t.act(g, t.root))
        keep = max(0, p.path.depth - shift)
        keep = min(keep, image.depth)
        return model.truncated_end(TreeVertex(model.pc.prefix(image.path, keep)))
    v, x = model.anchor(p)
    w, h = t.act_with_trace(g, v)
    spec = model.vspec(w)
    return model.glue(w, translate_free_point(h, x, spec.root))


# --------------------------------------------------------------------------
# north-south dynamics


@dataclass
class NorthSouthReport:
    attractor: BoundaryPoint | None
    repeller: BoundaryPoint | None
    indices: list[int]
    capture: dict[int, int | None] = field(default_factory=dict)  # depth -> n0, 1-based position
    sample_size: int = 0
    certified: bool = False


def north_south_probe(model: BoundaryModel, seq: Sequence[GammaElement], sample: Sequence[BoundaryPoint],
                      depths: Sequence[int] = (2, 3, 4), repel_depth: int = 2,
                      attractor: BoundaryPoint | None = None, repeller: BoundaryPoint | None = None,
                      base_point: BoundaryPoint | None = None) -> NorthSouthReport:
    """Locate attractor and repeller and measure uniform cylinder capture.

    Attractor and repeller default to accumulation points of the orbits of a
    base point under the sequence and its inverses."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        raise ValueError("sequence elements must be distinct")
    idx = list(range(len(seq)))
    if base_point is None:
        base_point = sample[0]
    if attractor is None:
        fwd = [act(model, g, base_point) for g in seq]
        idx, attractor = model.accumulation_point(fwd, max_depth=16)
    if repeller is None:
        bwd = [act(model, model.pc.invert(seq[i]), base_point) for i in idx]
        _, repeller = model.accumulation_point(bwd, max_depth=16)
    report = NorthSouthReport(attractor, repeller, idx, sample_size=len(sample))
    if attractor is None or repeller is None:
        return report
    try:
        away = model.basic_neighborhood(repeller, repel_depth)
    except Undecidable:
        return report
    K = [q for q in sample if model.in_neighborhood(q, away) is False and q != repeller]
    report.sample_size = len(K)
    images = {i: [act(model, seq[i], q) for q in K] for i in idx}
    for d in depths:
        W = model.basic_neighborhood(attractor, d)
        n0 = None
        for pos in range(len(idx) - 1, -1, -1):
            i = idx[pos]
            if all(model.in_neighborhood(z, W) is True for z in images[i]):
                n0 = i + 1
            else:
                break
        report.capture[d] = n0
    report.certified = all(v is not None for v in report.capture.values()) and bool(K)
    return report


# --------------------------------------------------------------------------
# dynamical quasi-convexity inside a vertex group


@dataclass
class DynQCReport:
    diameters: list[float]
    depth: int
    exceptions: int
    threshold: float


def _end_pair(h: Word, g: Word) -> tuple[PeriodicEnd, PeriodicEnd]:
    u, c = h.cyclic_reduction()
    return (PeriodicEnd(g * u, c).normalized(), PeriodicEnd(g * u, c.inverse()).normalized())


def dyn_qc_probe(spec, h: Word, cosets: Sequence[Word], d: int) -> DynQCReport:
    """Cylinder diameters of translates of the limit set of ``<h>``."""
    if not h:
        raise ValueError("H must be infinite cyclic")
    graph = StallingsGraph([h])
    for g in cosets:
        if graph.contains(g):
            raise ValueError(f"coset representative {g} lies in H")
    for i in range(len(cosets)):
        for j in range(i + 1, len(cosets)):
            if graph.contains(cosets[i].inverse() * cosets[j]):
                raise ValueError(f"cosets {cosets[i]} and {cosets[j]} coincide")
    parabolic = peripheral_of(spec, h) is not None
    diam = []
    for g in cosets:
        if parabolic:
            diam.append(0.0)
            continue
        a, b = _end_pair(h, g)
        k = common_prefix_length(a.letters(d).letters, b.letters(d).letters)
        diam.append(0.0 if k >= d else 2.0 ** (-k))
    thr = 2.0 ** (1 - d)
    return DynQCReport(diam, d, sum(1 for x in diam if x > thr), thr)


# --------------------------------------------------------------------------
# conical points


@dataclass
class ConicalWitness:
    elements: list[GammaElement]
    limit_other: BoundaryPoint  # where gamma_n^-1 sends points other than the end
    limit_end: BoundaryPoint  # gamma_n^-1 applied to the end
    certified: bool = False
    capture: int | None = None


def conical_witness(model: BoundaryModel, eta: TreeEnd, count: int = 8) -> ConicalWitness:
    """Elements moving the base vertex out along the ray toward ``eta``."""
    if not isinstance(eta, TreeEnd) or not eta.exact:
        raise ValueError("conical witnesses need an exact tree end")
    g = eta.gamma
    ray = model.ray(eta, eta.offset + eta.ell)
    base = model.spec.base
    start = None
    for j in range(eta.offset, eta.offset + eta.ell + 1):
        if ray[j].orbit == base:
            start = j
            break
    if start is None:
        w = ray[eta.offset].orbit
        tau = TreeVertex(model.pc.lift_vertex(w))
        g0 = model.tree.element_between(tau, Word(), ray[eta.offset])
    else:
        g0 = model.pc.normal_form(model.pc.items(ray[start].path))
    elements = [model.pc.multiply(model._power(g, n), g0) for n in range(1, count + 1)]
    g0i = model.pc.invert(g0)
    limit_other = act(model, g0i, model.tree_end(model.pc.invert(g)))
    limit_end = act(model, g0i, eta)
    return ConicalWitness(elements, limit_other, limit_end)


def certify_conical(model: BoundaryModel, w: ConicalWitness, eta: TreeEnd,
                    sample: Sequence[BoundaryPoint], d: int = 2) -> ConicalWitness:
    """Check that inverses collapse the sample while the end stays apart."""
    try:
        w_other, w_end = model.separate(w.limit_other, w.limit_end)
    except (Undecidable, ValueError):
        w.certified = False
        return w
    near_eta = model.basic_neighborhood(eta, d)
    K = [q for q in sample if q != eta and model.in_neighborhood(q, near_eta) is False]
    target = model.meet(w_other, model.basic_neighborhood(w.limit_other, d))
    n0 = None
    stays_apart = True
    for n in range(len(w.elements) - 1, -1, -1):
        inv = model.pc.invert(w.elements[n])
        if model.in_neighborhood(act(model, inv, eta), w_other) is not False:
            stays_apart = False
        if all(model.in_neighborhood(act(model, inv, q), target) is True for q in K):
            n0 = n + 1
        else:
            break
    w.capture = n0
    w.certified = stays_apart and n0 is not None and n0 < len(w.elements) and bool(K)
    return w


# --------------------------------------------------------------------------
# bounded parabolic points


@dataclass
class BoundedParabolicReport:
    point: EdgeParabolic
    depth: int
    compact: dict  # type -> (vertex, excluded cylinders)
    covered: int = 0
    undecided: int = 0
    uncovered: list = field(default_factory=list)
    sample_size: int = 0

    @property
    def certified(self) -> bool:
        return not self.uncovered and self.undecided <= max(0, self.sample_size // 100)


def _excluded(model: BoundaryModel, v: TreeVertex, cls: ParabolicClass, d: int):
    return cylinders_of(model.vspec(v), cls, d)


def in_compact_piece(model: BoundaryModel, x: EdgeParabolic, reps: dict, d: int, z) -> bool | None:
    """Is ``z`` in the compact set: gated at a type representative, away from the class?"""
    rel = model.relation(x, z)
    if rel is None:
        return None
    if rel.kind == "equal":
        return False
    for v, c in reps.values():
        if rel.vertex == v:
            ex = _excluded(model, v, c, d)
            inside = ex.contains(model.vspec(v), rel.other)
            if inside is None:
                return None
            if isinstance(rel.other, ParabolicClass):
                a, b = end_directions(model.vspec(v), rel.other)
                touches = any(ex._end_in(e.letters(ex.depth)) for e in (a, b))
                return not touches
            return not inside
    return False


def bounded_parabolic_witness(model: BoundaryModel, x, d: int, sample: Sequence[BoundaryPoint],
                              max_power: int = 24) -> BoundedParabolicReport:
    """Translate each sample point into a compact piece by an element fixing ``x``."""
    if not isinstance(x, EdgeParabolic):
        raise ValueError("bounded parabolic witnesses need an edge class")
    tree = model.tree
    reps, _gens = domain_quotient(tree, x.vertex, x.cls)
    report = BoundedParabolicReport(x, d, {k: (v, _excluded(model, v, c, d)) for k, (v, c) in reps.items()},
                                    sample_size=len(sample))
    for z in sample:
        if z == x:
            report.sample_size -= 1
            continue
        verdict = _cover_point(model, x, reps, d, z, max_power)
        if verdict is True:
            report.covered += 1
        elif verdict is None:
            report.undecided += 1
        else:
            report.uncovered.append(z)
    return report


def _cover_point(model: BoundaryModel, x: EdgeParabolic, reps: dict, d: int, z, max_power: int) -> bool | None:
    tree = model.tree
    rel = model.relation(x, z)
    if rel is None:
        return None
    v = rel.vertex
    cls_v = rel.trace_x
    rv, rc = reps[(v.orbit, cls_v.peripheral_index)]
    q1 = tree.element_between(v, rc.coset_rep * cls_v.coset_rep.inverse(), rv)
    z1 = act(model, q1, z)
    r = tree.root_word(rv.orbit, rc.peripheral_index)
    g = rc.coset_rep
    for k in sorted(range(-max_power, max_power + 1), key=lambda k: (abs(k), k)):
        q = q1 if k == 0 else model.pc.multiply(tree.loop_through(rv, g * r ** k * g.inverse()), q1)
        zk = z1 if k == 0 else act(model, q, z)
        verdict = in_compact_piece(model, x, reps, d, zk)
        if verdict is None:
            return None
        if verdict:
            if act(model, q, x) != x:
                raise RuntimeError(f"translating element {q} does not fix {x}")
            return True
    return False


# --------------------------------------------------------------------------
# limit sets of subgroups


@dataclass(frozen=True)
class SubgroupHandle:
    """A subgraph-of-groups subgroup, or a finitely generated subgroup of one vertex group."""

    kind: str  # "subgraph" or "vertex"
    vertices: tuple[str, ...] = ()
    edges: tuple[str, ...] = ()
    vertex: str = ""
    words: tuple[Word, ...] = ()

    @classmethod
    def subgraph(cls, vertices, edges=()) -> "SubgroupHandle":
        return cls("subgraph", tuple(vertices), tuple(edges))

    @classmethod
    def vertex_subgroup(cls, vertex: str, words) -> "SubgroupHandle":
        ws = tuple(Word.parse(w) if isinstance(w, str) else w for w in words)
        if any(not w for w in ws):
            raise ValueError("generators must be nontrivial")
        return cls("vertex", vertex=vertex, words=ws)


class LimitSet:
    """Membership in the limit set of a subgroup, by projection to the tree."""

    def __init__(self, model: BoundaryModel, handle: SubgroupHandle):
        self.model = model
        self.handle = handle
        spec = model.spec
        if handle.kind == "subgraph":
            bad = [v for v in handle.vertices if v not in spec.vertex_ids]
            bad += [e for e in handle.edges if e not in {x.id for x in spec.edges}]
            if bad:
                raise ValueError(f"unknown subgraph items {bad}")
            for e in handle.edges:
                es = spec.edge(e)
                if es.v not in handle.vertices or es.w not in handle.vertices:
                    raise ValueError(f"edge {e} leaves the subgraph")
            start = spec.base if spec.base in handle.vertices else handle.vertices[0]
            self.anchor = TreeVertex(model.pc.lift_vertex(start))
            self.edge_set = set(handle.edges)
            self.graph = None
        else:
            if handle.vertex not in spec.vertex_ids:
                raise ValueError(f"unknown vertex {handle.vertex}")
            self.anchor = TreeVertex(model.pc.lift_vertex(handle.vertex))
            self.edge_set = set()
            self.graph = StallingsGraph(list(handle.words))

    # -- the subtree

    def in_subtree(self, v: TreeVertex) -> bool:
        geo = self.model.tree.geodesic(self.anchor, v)
        for p, q in zip(geo, geo[1:]):
            deeper = q if q.depth > p.depth else p
            if deeper.path.edge_letters[-1].edge not in self.edge_set:
                return False
        return True

    def contains_element(self, g: GammaElement) -> bool:
        """Membership of a group element in the subgroup."""
        pc = self.model.pc
        a = self.anchor
        if self.handle.kind == "subgraph":
            h = pc.multiply(pc.multiply(pc.invert(a.path), g), a.path) if a.depth else g
            return all(f.edge in self.edge_set for f in h.edge_letters)
        image, w = self.model.tree.act_with_trace(g, a)
        return image == a and self.graph.contains(w)

    # -- points

    def contains(self, p) -> bool | None:
        m = self.model
        if isinstance(p, TreeEnd):
            if self.handle.kind == "vertex":
                return False
            if not p.exact:
                return None
            a = self.anchor
            depth = max(p.offset, a.depth) + 2 * p.ell + 2
            return self.in_subtree(m.ray(p, depth)[-1])
        if self.handle.kind == "subgraph":
            rel_vertex = self._gate_toward_anchor(p)
            return self.in_subtree(rel_vertex)
        tr = m.trace_at(p, self.anchor)
        if tr is None:
            return False
        return self._reads(tr)

    def _reads(self, tr: FreeBoundaryPoint) -> bool | None:
        spec = self.model.vspec(self.anchor)
        if isinstance(tr, PeriodicEnd):
            return self.graph.reads_end(tr)
        if isinstance(tr, ParabolicClass):
            a, b = end_directions(spec, tr)
            return self.graph.reads_end(a.normalized()) or self.graph.reads_end(b.normalized())
        return None

    def _gate_toward_anchor(self, p) -> TreeVertex:
        m = self.model
        v, t = m.anchor(p)
        geo = m.tree.geodesic(v, self.anchor)
        k, _, _ = m._follow(t, geo)
        return geo[k]

    def sample(self, rng: random.Random, count: int, radius: int = 2) -> list[BoundaryPoint]:
        """Points of the limit set: vertex points and edge classes along the subtree, and axis ends."""
        out: list[BoundaryPoint] = []
        tries = 0
        while len(out) < count and tries < 50 * count:
            tries += 1
            if self.handle.kind == "vertex":
                p = self._vertex_sample(rng)
            else:
                p = self._subgraph_sample(rng, radius)
            if p is not None and self.contains(p):
                out.append(p)
        return out

    def _vertex_sample(self, rng):
        m = self.model
        words = self.handle.words
        prod = Word()
        for _ in range(rng.randint(1, 4)):
            x = rng.choice(words)
            prod = prod * (x if rng.random() < 0.5 else x.inverse())
        if not prod:
            return None
        u, c = prod.cyclic_reduction()
        return m.glue(self.anchor, PeriodicEnd(u, c if rng.random() < 0.5 else c.inverse()))

    def _subgraph_sample(self, rng, radius):
        m = self.model
        v = self.anchor
        for _ in range(rng.randint(0, radius)):
            nbrs = [w for w in m.tree.neighbors(v)[0] if self.in_subtree(w)]
            if not nbrs:
                break
            v = rng.choice(nbrs)
        roll = rng.random()
        if roll < 0.5:
            return m.glue(v, random_periodic_end(rng, m.vspec(v)))
        nbrs = m.tree.neighbors(v)[0]
        if roll < 0.8 and nbrs:
            return m.edge_point(v, rng.choice(nbrs))
        if self.edge_set:
            g = self._random_element(rng)
            if g is not None and m.translation_length(g) > 0:
                return m.tree_end(g)
        return m.glue(v, random_periodic_end(rng, m.vspec(v)))

    def _random_element(self, rng) -> GammaElement | None:
        m = self.model
        spec = m.spec
        cur = self.anchor.orbit
        items: list = list(m.pc.items(self.anchor.path))
        for _ in range(rng.randint(1, 3)):
            letters = [f for f in spec.letters_at(cur) if f.edge in self.edge_set]
            if not letters:
                return None
            items.append(random_word(rng, spec.vertex(cur).rank, 1, 2))
            f = rng.choice(letters)
            items.append(f)
            cur = spec.terminus(f)
        items.append(random_word(rng, spec.vertex(cur).rank, 1, 2))
        path_back = self._path_within(cur, self.anchor.orbit)
        if path_back is None:
            return None
        items += path_back
        items += [s.reverse() if isinstance(s, EdgeLetter) else s.inverse()
                  for s in reversed(m.pc.items(self.anchor.path))]
        return m.pc.normal_form(items)

    def _path_within(self, u: str, w: str) -> list | None:
        spec = self.model.spec
        prev = {u: None}
        todo = [u]
        while todo:
            x = todo.pop(0)
            if x == w:
                break
            for f in spec.letters_at(x):
                if f.edge in self.edge_set and spec.terminus(f) not in prev:
                    prev[spec.terminus(f)] = (x, f)
                    todo.append(spec.terminus(f))
        if w not in prev:
            return None
        out = []
        x = w
        while prev[x] is not None:
            x0, f = prev[x]
            out.append(f)
            x = x0
        return out[::-1]


def limit_set(model: BoundaryModel, handle: SubgroupHandle) -> LimitSet:
    return LimitSet(model, handle)


@dataclass
class StabilizerVerdict:
    element: GammaElement
    member: bool
    preserved: bool | None
    witness: BoundaryPoint | None = None


def stabilizer_probe(model: BoundaryModel, lam: LimitSet, candidates: Sequence[GammaElement],
                     sample: Sequence[BoundaryPoint]) -> list[StabilizerVerdict]:
    out = []
    for g in candidates:
        member = lam.contains_element(g)
        if member:
            ok = True
            for p in sample:
                verdict = lam.contains(act(model, g, p))
                if verdict is not True:
                    ok = None if verdict is None and ok else False
                    if ok is False:
                        break
            out.append(StabilizerVerdict(g, True, ok))
            continue
        witness = None
        undecided = False
        for p in sample:
            verdict = lam.contains(act(model, g, p))
            if verdict is False:
                witness = p
                break
            if verdict is None:
                undecided = True
        out.append(StabilizerVerdict(g, False, None if witness is None and undecided else witness is None, witness))
    return out
