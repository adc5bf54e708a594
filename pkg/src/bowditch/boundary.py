"""Boundary points of a tree of free-group boundaries, and their neighbourhoods.

Points come in three kinds:

* ``VertexPoint``: a point of one vertex boundary that no edge touches;
* ``EdgeParabolic``: a parabolic class carried by edges, stored at the vertex
  of its domain nearest the base vertex;
* ``TreeEnd``: an end of the Bass-Serre tree that is not swallowed by a
  domain, either exact (the attracting end of a loxodromic element) or known
  only through a finite ray.

Open sets inside a vertex boundary are finite unions of cylinders. A parabolic
class lies in such a set when both of its ends do. Predicates answer True,
False or None, where None means the current truncation cannot decide.
"""
from __future__ import annotations

import random
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .freegrp import (
    FreeBoundaryPoint,
    ParabolicClass,
    PeriodicEnd,
    TruncatedEnd,
    VertexGroupSpec,
    Word,
    canonicalize_point,
    crossing_cached,
    end_directions,
    peripheral_of,
)
from .gog import GammaElement, GraphOfGroupsSpec, parse_items
from .tree import BassSerreTree, DomainView, TreeVertex, _lcp_steps, domain_of_class

Verdict = Optional[bool]


class Undecidable(RuntimeError):
    """The requested certificate needs more resolution than is available."""


# --------------------------------------------------------------------------
# points


@dataclass(frozen=True)
class VertexPoint:
    vertex: TreeVertex
    point: FreeBoundaryPoint

    def __str__(self) -> str:
        return f"pt[{self.vertex.path}] {self.point}"


@dataclass(frozen=True)
class EdgeParabolic:
    vertex: TreeVertex
    cls: ParabolicClass

    def __str__(self) -> str:
        return f"edge[{self.vertex.path}] {self.cls}"


class TreeEnd:
    """An end of the tree: exact via a loxodromic element, or a finite ray."""

    __slots__ = ("gamma", "ell", "offset", "head", "path", "_model")

    def __init__(self, model: "BoundaryModel", gamma: GammaElement | None = None,
                 path: TreeVertex | None = None, ell: int = 0, offset: int = 0):
        self._model = model
        self.gamma = gamma
        self.path = path
        self.ell = ell
        self.offset = offset
        self.head = ()
        self.head = tuple(model.ray(self, 3)) if gamma is not None else ()

    @property
    def exact(self) -> bool:
        return self.gamma is not None

    def __eq__(self, other) -> bool:
        if not isinstance(other, TreeEnd):
            return False
        if self.exact != other.exact:
            return False
        if not self.exact:
            return self.path == other.path
        if self.head != other.head:
            return False
        if self.gamma == other.gamma:
            return True
        model = self._model
        depth = max(self.offset, other.offset) + 2 * max(self.ell, other.ell) + 2
        if model.ray(self, depth)[-1] != model.ray(other, depth)[-1]:
            return False
        return model._power(self.gamma, 2 * other.ell) == model._power(other.gamma, 2 * self.ell)

    def __hash__(self) -> int:
        return hash(("end", self.head) if self.exact else ("ray", self.path))

    def __str__(self) -> str:
        return f"end[{self.gamma}]" if self.exact else f"ray[{self.path.path}]"

    __repr__ = __str__


BoundaryPoint = Union[VertexPoint, EdgeParabolic, TreeEnd]


def is_omega(p) -> bool:
    return isinstance(p, (VertexPoint, EdgeParabolic))


# --------------------------------------------------------------------------
# open sets in a vertex boundary


def _compatible(a: Word, b: Word) -> bool:
    n = min(len(a), len(b))
    return a.letters[:n] == b.letters[:n]


def _starts_with(w: Word, p: Word) -> bool:
    return len(w) >= len(p) and w.letters[: len(p)] == p.letters


@dataclass(frozen=True)
class OpenSet:
    """A finite union of cylinders, given by their prefixes."""

    prefixes: frozenset

    @classmethod
    def full(cls) -> "OpenSet":
        return cls(frozenset({Word()}))

    @classmethod
    def of(cls, words: Iterable[Word]) -> "OpenSet":
        return cls(frozenset(words))

    @property
    def is_full(self) -> bool:
        return Word() in self.prefixes

    @property
    def depth(self) -> int:
        return max((len(p) for p in self.prefixes), default=0)

    def _end_in(self, w: Word) -> bool:
        return any(_starts_with(w, p) for p in self.prefixes)

    def contains(self, spec: VertexGroupSpec, x: FreeBoundaryPoint) -> Verdict:
        d = self.depth
        if isinstance(x, ParabolicClass):
            a, b = end_directions(spec, x)
            return self._end_in(a.letters(d)) and self._end_in(b.letters(d))
        if isinstance(x, PeriodicEnd):
            return self._end_in(x.letters(d))
        pre = x.prefix
        if any(_starts_with(pre, p) for p in self.prefixes):
            return True
        if all(not _compatible(pre, p) for p in self.prefixes):
            return False
        return None

    def refines(self, other: "OpenSet") -> bool:
        return all(any(_starts_with(p, q) for q in other.prefixes) for p in self.prefixes)

    def disjoint(self, other: "OpenSet") -> bool:
        return all(not _compatible(p, q) for p in self.prefixes for q in other.prefixes)

    def meet(self, other: "OpenSet") -> "OpenSet":
        out = set()
        for p in self.prefixes:
            for q in other.prefixes:
                if _starts_with(p, q):
                    out.add(p)
                elif _starts_with(q, p):
                    out.add(q)
        return OpenSet(frozenset(out))

    def __str__(self) -> str:
        if self.is_full:
            return "X"
        return "{" + ",".join(sorted((str(p) for p in self.prefixes), key=lambda s: (len(s), s))) + "}"


def cylinders_of(spec: VertexGroupSpec, x: FreeBoundaryPoint, d: int) -> OpenSet:
    """The depth-``d`` cylinders meeting the fibre of ``x``."""
    if isinstance(x, ParabolicClass):
        a, b = end_directions(spec, x)
        return OpenSet.of([a.letters(d), b.letters(d)])
    if isinstance(x, PeriodicEnd):
        return OpenSet.of([x.letters(d)])
    return OpenSet.of([x.prefix.prefix(d)])


def split_cylinders(spec: VertexGroupSpec, x: FreeBoundaryPoint, y: FreeBoundaryPoint,
                    start: int = 1, max_depth: int = 24) -> tuple[OpenSet, OpenSet]:
    """Disjoint cylinder sets around two distinct points of one vertex boundary."""
    for d in range(max(start, 1), max_depth + 1):
        ux, uy = cylinders_of(spec, x, d), cylinders_of(spec, y, d)
        if ux.disjoint(uy):
            return ux, uy
        if isinstance(x, TruncatedEnd) and d >= len(x.prefix):
            break
        if isinstance(y, TruncatedEnd) and d >= len(y.prefix):
            break
    raise Undecidable(f"cannot split {x} from {y} by cylinders")


# --------------------------------------------------------------------------
# neighbourhoods


@dataclass(frozen=True)
class NeighborhoodSpec:
    """A basic open set around ``center``.

    Points of vertex boundaries use a finite support of domain vertices with a
    cylinder set at each; tree ends use the subtree beyond the ``m``-th ray
    vertex."""

    center: object
    support: tuple = ()
    m: int | None = None

    def support_map(self) -> dict:
        return dict(self.support)

    def __str__(self) -> str:
        if self.m is not None:
            return f"W[{self.center}; m={self.m}]"
        body = "; ".join(f"{v.path}:{u}" for v, u in self.support)
        return f"W[{self.center}; {body}]"


SUPPORT_CAP = 8


@dataclass
class Relation:
    kind: str  # "equal", "meet" or "gate"
    vertex: TreeVertex | None = None
    trace_x: FreeBoundaryPoint | None = None
    other: FreeBoundaryPoint | None = None  # q's trace (meet) or exit class at vertex (gate)
    q_vertex: TreeVertex | None = None
    q_exit: ParabolicClass | None = None
    m_beyond: int | None = None


class BoundaryModel:
    """Point model, domains and neighbourhood calculus over one scenario."""

    def __init__(self, spec_or_tree: GraphOfGroupsSpec | BassSerreTree, cutoff: int = 1):
        tree = spec_or_tree if isinstance(spec_or_tree, BassSerreTree) else BassSerreTree(spec_or_tree, cutoff)
        self.tree = tree
        self.spec = tree.spec
        self.pc = tree.pc
        self._powers: dict[GammaElement, list[GammaElement]] = {}
        self._rays: dict[GammaElement, list[TreeVertex]] = {}
        self._domains: dict[tuple, DomainView] = {}
        self._edge_peripherals = {
            v: {tree.letter(f).alpha_index for f in self.spec.letters_at(v)} for v in self.spec.vertex_ids
        }

    def vspec(self, v: TreeVertex) -> VertexGroupSpec:
        return self.spec.vertex(v.orbit)

    # -- gluing

    def glue(self, vertex: TreeVertex, x: FreeBoundaryPoint) -> BoundaryPoint:
        """Canonical point for a raw vertex-boundary point."""
        x = canonicalize_point(x, self.spec.vertex(vertex.orbit))
        if isinstance(x, ParabolicClass) and x.peripheral_index in self._edge_peripherals[vertex.orbit]:
            v, c = self.tree.canonical_class(vertex, x)
            return EdgeParabolic(v, c)
        return VertexPoint(vertex, x)

    def edge_point(self, u: TreeVertex, w: TreeVertex) -> EdgeParabolic:
        cu, _ = self.tree.edge_classes(u, w)
        v, c = self.tree.canonical_class(u, cu)
        return EdgeParabolic(v, c)

    def translation_length(self, g: GammaElement) -> int:
        t = self.tree
        r = t.root
        d1 = t.distance(r, t.act(g, r))
        d2 = t.distance(r, t.act(self.pc.multiply(g, g), r))
        return max(0, d2 - d1)

    def tree_end(self, gamma: GammaElement) -> BoundaryPoint:
        """The attracting end of a loxodromic element, folded into a domain if it lies in one."""
        ell = self.translation_length(gamma)
        if ell == 0:
            raise ValueError(f"{gamma} is elliptic on the tree")
        d1 = self.tree.distance(self.tree.root, self.tree.act(gamma, self.tree.root))
        end = TreeEnd(self, gamma=gamma, ell=ell, offset=(d1 - ell) // 2)
        folded = self.fold_end(end)
        return folded if folded is not None else end

    def truncated_end(self, path: TreeVertex) -> TreeEnd:
        return TreeEnd(self, path=path)

    def fold_end(self, end: TreeEnd) -> EdgeParabolic | None:
        """The edge class whose domain eventually contains the ray, if any."""
        if not end.exact:
            return None
        lo = end.offset + 1
        ray = self.ray(end, lo + end.ell + 1)
        cls = None
        for j in range(lo, lo + end.ell):
            a, _ = self.tree.edge_classes(ray[j], ray[j - 1])
            b, _ = self.tree.edge_classes(ray[j], ray[j + 1])
            if a != b:
                return None
            if cls is None:
                cls = (ray[j], a)
        v, c = self.tree.canonical_class(*cls)
        return EdgeParabolic(v, c)

    # -- rays

    def _power(self, g: GammaElement, n: int) -> GammaElement:
        lst = self._powers.setdefault(g, [self.pc.identity()])
        while len(lst) <= n:
            lst.append(self.pc.multiply(lst[-1], g))
        return lst[n]

    def ray(self, end: TreeEnd, depth: int) -> list[TreeVertex]:
        """Vertices ``r_0 .. r_depth`` of the ray from the base vertex."""
        if not end.exact:
            if depth > end.path.depth:
                raise Undecidable(f"ray known only to depth {end.path.depth}")
            return [TreeVertex(self.pc.prefix(end.path.path, j)) for j in range(depth + 1)]
        cached = self._rays.get(end.gamma)
        if cached is not None and len(cached) > depth:
            return cached[: depth + 1]
        n = -(-depth // end.ell) + 1
        far = self.tree.act(self._power(end.gamma, n), self.tree.root)
        out = [TreeVertex(self.pc.prefix(far.path, j)) for j in range(depth + 1)]
        self._rays[end.gamma] = out
        return out

    def ray_depth_available(self, end: TreeEnd) -> int:
        return 10 ** 9 if end.exact else end.path.depth

    # -- anchors, domains, traces

    def anchor(self, p) -> tuple[TreeVertex, FreeBoundaryPoint]:
        if isinstance(p, VertexPoint):
            return p.vertex, p.point
        if isinstance(p, EdgeParabolic):
            return p.vertex, p.cls
        raise TypeError("tree ends have no anchor vertex")

    def domain(self, p, radius: int = 2) -> DomainView:
        if isinstance(p, EdgeParabolic):
            key = (p.vertex, p.cls, radius)
            view = self._domains.get(key)
            if view is None:
                view = domain_of_class(self.tree, p.vertex, p.cls, radius)
                self._domains[key] = view
            return view
        if isinstance(p, VertexPoint):
            v = p.vertex
            return DomainView(v, None, radius, [v], {v: p.point}, {v: []}, {v: 0}, "singleton")
        raise ValueError("tree ends have empty domain")

    def _follow(self, trace, vertices: Sequence[TreeVertex]):
        """Walk from ``vertices[0]`` while the point's domain continues.

        Returns (last index inside, trace there, exit class at that vertex or None)."""
        for k in range(len(vertices) - 1):
            cu, cw = self.tree.edge_classes(vertices[k], vertices[k + 1])
            if cu == trace:
                trace = cw
                continue
            return k, trace, cu
        return len(vertices) - 1, trace, None

    def trace_at(self, p, v: TreeVertex) -> FreeBoundaryPoint | None:
        """Trace of an Omega point at ``v``, or None when ``v`` is outside its domain."""
        a, t = self.anchor(p)
        geo = self.tree.geodesic(a, v)
        k, tr, _ = self._follow(t, geo)
        return tr if k == len(geo) - 1 else None

    def _path_toward_end(self, start: TreeVertex, end: TreeEnd, extra: int) -> tuple[list[TreeVertex], int]:
        depth = start.depth + extra
        if not end.exact:
            depth = min(depth, end.path.depth)
        ray = self.ray(end, depth)
        k = _lcp_steps(start, ray[-1])
        k = min(k, start.depth, depth)
        up = [TreeVertex(self.pc.prefix(start.path, j)) for j in range(start.depth, k - 1, -1)]
        return up + ray[k + 1:], k

    def relation(self, x, q) -> Relation | None:
        """How ``q`` sits relative to the domain of the Omega point ``x``."""
        if x == q:
            return Relation("equal")
        ax, tx = self.anchor(x)
        if isinstance(q, TreeEnd):
            extra = 2 * (q.offset + q.ell) + 8 if q.exact else 0
            for attempt in range(3):
                path, k = self._path_toward_end(ax, q, extra)
                kx, trx, cx = self._follow(tx, path)
                if cx is not None:
                    break
                if not q.exact:
                    return None
                extra *= 2
            else:
                return None
            far = path[kx + 1]
            up_len = ax.depth - k + 1
            m = far.depth - 1 if kx + 1 >= up_len else k
            return Relation("gate", path[kx], trx, cx, m_beyond=m)
        aq, tq = self.anchor(q)
        geo = self.tree.geodesic(ax, aq)
        kx, trx, cx = self._follow(tx, geo)
        kq, trq, cq = self._follow(tq, geo[::-1])
        iq = len(geo) - 1 - kq
        if iq <= kx:
            return Relation("meet", geo[kx], trx, trq)
        return Relation("gate", geo[kx], trx, cx, q_vertex=geo[iq], q_exit=cq)

    # -- membership

    def _end_membership(self, center: TreeEnd, m: int, q) -> Verdict:
        try:
            ray = self.ray(center, m + 1)
        except Undecidable:
            return None
        target = ray[m + 1]
        if isinstance(q, TreeEnd):
            if not q.exact and q.path.depth < m + 1:
                return None
            return self.ray(q, m + 1)[m + 1] == target
        aq, _ = self.anchor(q)
        return aq.depth > m and _lcp_steps(aq, target) >= m + 1

    def in_neighborhood(self, q, W: NeighborhoodSpec) -> Verdict:
        if W.m is not None:
            return self._end_membership(W.center, W.m, q)
        x = W.center
        if q == x:
            return True
        rel = self.relation(x, q)
        if rel is None:
            return None
        sup = W.support_map()
        u = sup.get(rel.vertex)
        if u is None:
            return True
        return u.contains(self.vspec(rel.vertex), rel.other)

    def clause(self, q, W: NeighborhoodSpec) -> str | None:
        """Which part of the neighbourhood ``q`` falls in: 'A' tree ends, 'B' gated, 'C' traces."""
        if self.in_neighborhood(q, W) is not True:
            return None
        if isinstance(q, TreeEnd):
            return "A"
        if W.m is not None:
            return "B"
        rel = self.relation(W.center, q)
        return "C" if rel.kind in ("equal", "meet") else "B"

    # -- basic neighbourhoods

    def basic_neighborhood(self, p, n: int, support_radius: int | None = None) -> NeighborhoodSpec:
        if isinstance(p, TreeEnd):
            return NeighborhoodSpec(p, m=n)
        r = max(0, n // 2) if support_radius is None else support_radius
        view = self.domain(p, r)
        verts = [v for v in view.vertices if view.depth_in_domain[v] <= r][:SUPPORT_CAP]
        sup = tuple((v, cylinders_of(self.vspec(v), view.classes[v], n)) for v in verts)
        return NeighborhoodSpec(p, sup)

    def meet(self, W1: NeighborhoodSpec, W2: NeighborhoodSpec) -> NeighborhoodSpec:
        """A basic neighbourhood inside both, for two neighbourhoods of one point."""
        if W1.center != W2.center:
            raise ValueError("neighbourhoods of different points")
        if W1.m is not None:
            return NeighborhoodSpec(W1.center, m=max(W1.m, W2.m))
        s1, s2 = W1.support_map(), W2.support_map()
        merged = dict(s1)
        for v, u in s2.items():
            merged[v] = merged[v].meet(u) if v in merged else u
        return NeighborhoodSpec(W1.center, tuple(merged.items()))

    # -- neighbourhood constructions

    def avoid_edge(self, p, u: TreeVertex, w: TreeVertex) -> NeighborhoodSpec:
        """A neighbourhood of ``p`` missing the edge class of ``{u, w}``."""
        y = self.edge_point(u, w)
        if y == p:
            raise ValueError("both endpoints of the edge lie in the domain of the point")
        if isinstance(p, TreeEnd):
            ay, _ = self.anchor(y)
            ray = self.ray(p, ay.depth + 1)
            m = _lcp_steps(ay, ray[-1])
            return NeighborhoodSpec(p, m=m)
        rel = self.relation(p, y)
        if rel is None:
            raise Undecidable("relation to the edge class is undecided")
        spec = self.vspec(rel.vertex)
        up, _ = split_cylinders(spec, rel.trace_x, rel.other)
        return NeighborhoodSpec(p, ((rel.vertex, up),))

    def separate(self, p, q) -> tuple[NeighborhoodSpec, NeighborhoodSpec]:
        if p == q:
            raise ValueError("points coincide")
        if isinstance(p, TreeEnd) and isinstance(q, TreeEnd):
            depth = 4
            while True:
                try:
                    rp, rq = self.ray(p, depth), self.ray(q, depth)
                except Undecidable:
                    raise Undecidable("rays agree as far as they are known") from None
                k = _lcp_steps(rp[-1], rq[-1])
                if k < depth:
                    return NeighborhoodSpec(p, m=k), NeighborhoodSpec(q, m=k)
                depth *= 2
                if depth > 4096:
                    raise Undecidable("rays agree to depth 4096")
        if isinstance(p, TreeEnd):
            wq, wp = self.separate(q, p)
            return wp, wq
        rel = self.relation(p, q)
        if rel is None:
            raise Undecidable("relation undecided at this truncation")
        if isinstance(q, TreeEnd):
            up, _ = split_cylinders(self.vspec(rel.vertex), rel.trace_x, rel.other)
            return NeighborhoodSpec(p, ((rel.vertex, up),)), NeighborhoodSpec(q, m=rel.m_beyond)
        if rel.kind == "meet":
            up, uq = split_cylinders(self.vspec(rel.vertex), rel.trace_x, rel.other)
            return NeighborhoodSpec(p, ((rel.vertex, up),)), NeighborhoodSpec(q, ((rel.vertex, uq),))
        up, _ = split_cylinders(self.vspec(rel.vertex), rel.trace_x, rel.other)
        tq = self.trace_at(q, rel.q_vertex)
        uq, _ = split_cylinders(self.vspec(rel.q_vertex), tq, rel.q_exit)
        return NeighborhoodSpec(p, ((rel.vertex, up),)), NeighborhoodSpec(q, ((rel.q_vertex, uq),))

    def filtration(self, W: NeighborhoodSpec, q) -> NeighborhoodSpec:
        """A neighbourhood of ``q`` contained in ``W``; needs ``q`` in ``W``."""
        verdict = self.in_neighborhood(q, W)
        if verdict is None:
            raise Undecidable("membership undecided")
        if not verdict:
            raise ValueError(f"{q} is not in the neighbourhood")
        if q == W.center:
            return W
        if W.m is not None:
            if isinstance(q, TreeEnd):
                return NeighborhoodSpec(q, m=W.m)
            aq, tq = self.anchor(q)
            _, here = self.tree.parent_edge_classes(aq)
            u, _ = split_cylinders(self.vspec(aq), tq, here)
            return NeighborhoodSpec(q, ((aq, u),))
        x = W.center
        rel = self.relation(x, q)
        sup = W.support_map()
        if isinstance(q, TreeEnd):
            return NeighborhoodSpec(q, m=rel.m_beyond)
        if rel.kind == "meet":
            v = rel.vertex
            spec = self.vspec(v)
            uq, _ = split_cylinders(spec, rel.other, rel.trace_x)
            if v in sup:
                uq = self._shrink_into(spec, rel.other, uq, sup[v])
            return NeighborhoodSpec(q, ((v, uq),))
        tq = self.trace_at(q, rel.q_vertex)
        uq, _ = split_cylinders(self.vspec(rel.q_vertex), tq, rel.q_exit)
        return NeighborhoodSpec(q, ((rel.q_vertex, uq),))

    def _shrink_into(self, spec: VertexGroupSpec, x: FreeBoundaryPoint, u: OpenSet, target: OpenSet) -> OpenSet:
        d = u.depth
        while not u.refines(target):
            d += 1
            if d > 40:
                raise Undecidable("cannot fit cylinders inside the target set")
            u = u.meet(cylinders_of(spec, x, d))
        return u

    def closure_gap(self, W: NeighborhoodSpec, max_depth: int = 9) -> NeighborhoodSpec:
        """A smaller neighbourhood of the same point whose closure lies in ``W``."""
        p = W.center
        if W.m is not None:
            m = W.m
            for n in range(m + 1, m + 64):
                ray = self.ray(p, n + 1)
                y = self.edge_point(ray[n], ray[n + 1])
                if self.in_neighborhood(y, W) is True:
                    return NeighborhoodSpec(p, m=n)
            raise Undecidable("no closure-safe depth found")
        sup = W.support_map()
        new = []
        for v, u in sup.items():
            spec = self.vspec(v)
            tr = self.trace_at(p, v)
            for n in range(max(u.depth, 1), max_depth + 1):
                un = cylinders_of(spec, tr, n)
                if un.refines(u) and self._closure_inside(spec, un, u, n):
                    new.append((v, un))
                    break
            else:
                raise Undecidable(f"no closure-safe cylinders up to depth {max_depth}")
        return NeighborhoodSpec(p, tuple(new))

    def _closure_inside(self, spec: VertexGroupSpec, un: OpenSet, u: OpenSet, n: int) -> bool:
        if un.depth != n:
            return False
        for cls, a, b in crossing_cached(spec, n):
            ia, ib = a in un.prefixes, b in un.prefixes
            if (ia or ib) and u.contains(spec, cls) is not True:
                return False
        return True

    # -- sequences

    def converges(self, seq: Sequence, p, levels: Iterable[int] = (1, 2, 3, 4), min_tail: int | None = None):
        return convergence_report(self, seq, p, levels, min_tail)

    def accumulation_point(self, seq: Sequence, max_depth: int = 12, vertex_depth: int = 8):
        return accumulation_point(self, seq, max_depth, vertex_depth)


# --------------------------------------------------------------------------
# convergence and accumulation


@dataclass
class ConvergenceReport:
    holds: Verdict
    tails: dict[int, int | None] = field(default_factory=dict)


def convergence_report(model: BoundaryModel, seq: Sequence, p, levels, min_tail=None) -> ConvergenceReport:
    seq = list(seq)
    if not seq:
        return ConvergenceReport(None)
    min_tail = max(1, len(seq) // 4) if min_tail is None else min_tail
    tails: dict[int, int | None] = {}
    overall: Verdict = True
    for n in levels:
        W = model.basic_neighborhood(p, n)
        verdicts = [model.in_neighborhood(s, W) for s in seq]
        m0 = len(seq)
        while m0 > 0 and verdicts[m0 - 1] is True:
            m0 -= 1
        tails[n] = m0 if m0 < len(seq) else None
        if len(seq) - m0 < min_tail:
            if any(v is None for v in verdicts[len(seq) - min_tail:]):
                overall = None if overall is not False else False
            else:
                overall = False
    return ConvergenceReport(overall, tails)


def _direction(model: BoundaryModel, s, v: TreeVertex, cap: int):
    """Child of ``v`` toward the point ``s``, or None if ``s`` sits at ``v``."""
    if isinstance(s, TreeEnd):
        if not s.exact and s.path.depth <= v.depth:
            return None
        return model.ray(s, v.depth + 1)[v.depth + 1]
    a, _ = model.anchor(s)
    if a.depth <= v.depth:
        return None
    return TreeVertex(model.pc.prefix(a.path, v.depth + 1))


def accumulation_point(model: BoundaryModel, seq: Sequence, max_depth: int = 12, vertex_depth: int = 8):
    """A majority-descent subsequence and its limit at the working resolution.

    Descend the tree from the base vertex while one branch keeps at least
    half of the remaining terms; then accumulate their traces inside the
    vertex boundary where the descent stopped."""
    seq = list(seq)
    idx = list(range(len(seq)))
    v = model.tree.root
    path_classes = []
    while v.depth < max_depth:
        groups: dict = {}
        for i in idx:
            c = _direction(model, seq[i], v, max_depth)
            groups.setdefault(c, []).append(i)
        best = max((k for k in groups if k is not None), key=lambda k: (len(groups[k]), -min(groups[k])),
                   default=None)
        if best is None or len(groups[best]) < 2 or 2 * len(groups[best]) < len(idx):
            break
        path_classes.append(model.tree.edge_classes(v, best))
        idx = groups[best]
        v = best
    if v.depth >= max_depth:
        # check whether the last stretch ran inside one domain
        tail = path_classes[-3:]
        if len(tail) >= 2 and all(tail[k][1] == tail[k + 1][0] for k in range(len(tail) - 1)):
            prev = TreeVertex(model.pc.prefix(v.path, v.depth - 1))
            return idx, model.edge_point(prev, v)
        return idx, model.truncated_end(v)
    spec = model.vspec(v)
    traces = {}
    for i in idx:
        c = _direction(model, seq[i], v, max_depth)
        if c is None:
            traces[i] = model.trace_at(seq[i], v) if is_omega(seq[i]) else None
        else:
            traces[i] = model.tree.edge_classes(v, c)[0]
    idx = [i for i in idx if traces[i] is not None]
    if not idx:
        return [], None
    prefix = Word()
    for d in range(1, vertex_depth + 1):
        groups: dict = {}
        for i in idx:
            w = _trace_letters(spec, traces[i], d)
            if w is not None:
                groups.setdefault(w, []).append(i)
        if not groups:
            break
        best = max(groups, key=lambda k: (len(groups[k]), -min(groups[k])))
        if len(groups[best]) < 2 or 2 * len(groups[best]) < len(idx):
            break
        idx = groups[best]
        prefix = best
    distinct = Counter(traces[i] for i in idx)
    if len(distinct) == 1:
        return idx, model.glue(v, traces[idx[0]])
    return idx, model.glue(v, TruncatedEnd(prefix))


def _trace_letters(spec: VertexGroupSpec, x: FreeBoundaryPoint, d: int) -> Word | None:
    if isinstance(x, ParabolicClass):
        return end_directions(spec, x)[0].letters(d)
    if isinstance(x, PeriodicEnd):
        return x.letters(d)
    return x.prefix.prefix(d) if len(x.prefix) >= d else None


# --------------------------------------------------------------------------
# text syntax


_POINT_RE = re.compile(r"^\s*(pt|edge|end|ray)\[(.*?)\]\s*(.*?)\s*$")


def parse_free_point(text: str) -> FreeBoundaryPoint:
    text = text.strip()
    if text.endswith(")^oo"):
        pre, _, rest = text.partition("(")
        return PeriodicEnd(Word.parse(pre), Word.parse(rest[: -len(")^oo")]))
    m = re.fullmatch(r"(\w*)\.P(\d+)", text)
    if m:
        rep = "" if m.group(1) == "e" else m.group(1)
        return ParabolicClass(Word.parse(rep), int(m.group(2)))
    if text.endswith("..."):
        return TruncatedEnd(Word.parse(text[:-3]))
    raise ValueError(f"cannot parse boundary point {text!r}")


def parse_point(model: BoundaryModel, text: str) -> BoundaryPoint:
    m = _POINT_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse point {text!r}")
    kind, path, rest = m.groups()
    if kind in ("end",):
        return model.tree_end(model.pc.normal_form(parse_items(path)))
    v = model.tree.vertex(path)
    if kind == "ray":
        return model.truncated_end(v)
    x = parse_free_point(rest)
    return model.glue(v, x)


def format_point(p) -> str:
    return str(p)


# --------------------------------------------------------------------------
# sampling


def random_word(rng: random.Random, rank: int, lo: int, hi: int) -> Word:
    letters: list[int] = []
    n = rng.randint(lo, hi)
    while len(letters) < n:
        x = rng.choice([k for k in range(1, rank + 1)] + [-k for k in range(1, rank + 1)])
        if letters and letters[-1] == -x:
            continue
        letters.append(x)
    return Word(letters)


def random_periodic_end(rng: random.Random, spec: VertexGroupSpec, depth: int = 3) -> PeriodicEnd:
    while True:
        period = random_word(rng, spec.rank, 1, 3)
        if not period.is_cyclically_reduced():
            continue
        if peripheral_of(spec, period) is not None:
            continue
        return PeriodicEnd(random_word(rng, spec.rank, 0, depth), period).normalized()


def random_loop(model: BoundaryModel, rng: random.Random, edges: int, word_len: int = 2) -> GammaElement:
    spec = model.spec
    cur = spec.base
    items: list = []
    for _ in range(edges):
        items.append(random_word(rng, spec.vertex(cur).rank, 1, word_len))
        f = rng.choice(spec.letters_at(cur))
        items.append(f)
        cur = spec.terminus(f)
    items.append(random_word(rng, spec.vertex(cur).rank, 1, word_len))
    items += [f.reverse() for f in reversed(model.pc.tree_path(cur))]
    return model.pc.normal_form(items)


def random_loxodromic(model: BoundaryModel, rng: random.Random, edges: int = 2) -> GammaElement:
    for _ in range(1000):
        g = random_loop(model, rng, rng.randint(1, edges) if edges > 1 else 1)
        if model.translation_length(g) > 0:
            return g
    raise RuntimeError("no loxodromic element found")


def random_point(model: BoundaryModel, rng: random.Random, radius: int = 2, kinds=("vertex", "edge", "end")) -> BoundaryPoint:
    kind = rng.choice(kinds)
    if kind == "end" and model.spec.edges:
        return model.tree_end(random_loxodromic(model, rng))
    v = model.tree.root
    for _ in range(rng.randint(0, radius)):
        nbrs, _ = model.tree.neighbors(v)
        v = rng.choice(nbrs)
    if kind == "edge" and model.spec.edges:
        nbrs, _ = model.tree.neighbors(v)
        return model.edge_point(v, rng.choice(nbrs))
    return model.glue(v, random_periodic_end(rng, model.vspec(v)))


def sample_points(model: BoundaryModel, rng: random.Random, count: int, radius: int = 2) -> list[BoundaryPoint]:
    return [random_point(model, rng, radius) for _ in range(count)]


def _near_free_point(rng: random.Random, spec: VertexGroupSpec, x: FreeBoundaryPoint, depth: int) -> PeriodicEnd:
    if isinstance(x, ParabolicClass):
        x = end_directions(spec, x)[rng.randrange(2)]
    lead = x.letters(depth + rng.randint(0, 4))
    while True:
        tail = random_periodic_end(rng, spec, 2)
        w = lead * tail.prefix
        if len(w) >= len(lead) and w.prefix(len(lead)) == lead:
            return PeriodicEnd(w, tail.period).normalized()


def points_near(model: BoundaryModel, p, rng: random.Random, count: int, depth: int = 6) -> list[BoundaryPoint]:
    """Random points close to ``p``: deep along its ray, or in small cylinders around its traces."""
    out: list[BoundaryPoint] = []
    if isinstance(p, TreeEnd):
        ray = model.ray(p, depth + 4) if p.exact else model.ray(p, p.path.depth)
        for _ in range(count):
            v = ray[rng.randint(min(depth, len(ray) - 1), len(ray) - 1)]
            out.append(model.glue(v, random_periodic_end(rng, model.vspec(v))))
        return out
    view = model.domain(p, 2)
    for _ in range(count):
        v = rng.choice(view.vertices)
        x = view.classes[v] if view.classes[v] is not None else model.anchor(p)[1]
        if isinstance(x, TruncatedEnd):
            raise ValueError("cannot sample near a truncated trace")
        out.append(model.glue(v, _near_free_point(rng, model.vspec(v), x, depth)))
    return out
