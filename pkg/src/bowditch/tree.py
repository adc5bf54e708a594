"""Lazy truncations of the Bass-Serre tree, its metric, and domains of edge classes.

A tree vertex is a path in normal form from the base vertex whose trailing
word is trivial. The parent of a vertex drops its last edge; children hang
off every oriented edge at the terminal vertex, one per coset of the edge
image in the vertex group. Cosets are enumerated from a capped transversal
that always contains the cosets lying inside the peripheral subgroup, which
is what domains need.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

from .freegrp import ParabolicClass, Word, min_coset_rep, peripheral_of, words_up_to
from .gog import EdgeLetter, GammaElement, GraphOfGroupsSpec, PathCalculus, power_of


class BudgetExceeded(RuntimeError):
    pass


class NotParabolized(ValueError):
    pass


@dataclass(frozen=True)
class TreeVertex:
    path: GammaElement

    @property
    def orbit(self) -> str:
        return self.path.end

    @property
    def depth(self) -> int:
        return self.path.length

    @property
    def label(self) -> str:
        return f"{self.orbit}:{self.path}"

    def __str__(self) -> str:
        return self.label

    def steps(self) -> tuple:
        """Pairs ``(t_i, e_{i+1})`` that spell the path."""
        syl = self.path.syllables
        return tuple((syl[k], syl[k + 1]) for k in range(0, len(syl) - 1, 2))


@dataclass(frozen=True)
class LetterData:
    alpha_index: int
    alpha_conj: Word
    alpha_power: int  # alpha == conj * r^alpha_power * conj^-1
    omega_index: int
    omega_conj: Word
    omega_power: int


def _lcp_steps(p: TreeVertex, q: TreeVertex) -> int:
    a, b = p.path.syllables, q.path.syllables
    k = 0
    n = min(len(a), len(b)) // 2
    while k < n and a[2 * k] == b[2 * k] and a[2 * k + 1] == b[2 * k + 1]:
        k += 1
    return k


class BassSerreTree:
    """The tree of a parabolized graph of groups, explored on demand."""

    def __init__(self, spec: GraphOfGroupsSpec, cutoff: int = 1):
        self.spec = spec
        self.pc = PathCalculus(spec)
        self.cutoff = cutoff
        self._letter: dict[EdgeLetter, LetterData] = {}
        self._transversal: dict[tuple[EdgeLetter, int], tuple[tuple[Word, ...], bool]] = {}
        for e in spec.edges:
            for sign in (1, -1):
                f = EdgeLetter(e.id, sign)
                a = peripheral_of(spec.vertex(spec.origin(f)), spec.alpha(f))
                o = peripheral_of(spec.vertex(spec.terminus(f)), spec.omega(f))
                if a is None or o is None:
                    raise NotParabolized(f"edge {e.id} has a loxodromic endpoint; parabolize first")
                self._letter[f] = LetterData(a[0], a[1], a[2] * a[3], o[0], o[1], o[2] * o[3])

    # -- basic structure

    @cached_property
    def root(self) -> TreeVertex:
        return TreeVertex(self.pc.identity())

    def letter(self, f: EdgeLetter) -> LetterData:
        return self._letter[f]

    def root_word(self, v: str, i: int) -> Word:
        return self.spec.vertex(v).root(i)

    def transversal(self, f: EdgeLetter, cutoff: int | None = None) -> tuple[tuple[Word, ...], bool]:
        """Shortlex-sorted coset representatives of ``<alpha(f)>`` and an exactness flag."""
        cutoff = self.cutoff if cutoff is None else cutoff
        key = (f, cutoff)
        hit = self._transversal.get(key)
        if hit is not None:
            return hit
        v = self.spec.origin(f)
        ld = self._letter[f]
        r = self.root_word(v, ld.alpha_index)
        a = self.spec.alpha(f)
        n = abs(ld.alpha_power)
        rank = self.spec.vertex(v).rank
        reps = set()
        if rank == 1:
            reps = {min_coset_rep(r ** j, a) for j in range(n)}
            exact = True
        else:
            inner = [ld.alpha_conj * r ** j * ld.alpha_conj.inverse() for j in range(n)]
            for g in words_up_to(rank, cutoff):
                for x in inner:
                    reps.add(min_coset_rep(g * x, a))
            exact = False
        out = (tuple(sorted(reps, key=Word.shortlex_key)), exact)
        self._transversal[key] = out
        return out

    def vertex(self, text_or_path) -> TreeVertex:
        if isinstance(text_or_path, TreeVertex):
            return text_or_path
        if isinstance(text_or_path, GammaElement):
            return TreeVertex(text_or_path.trimmed())
        return TreeVertex(self.pc.normal_form(text_or_path).trimmed())

    def parent(self, p: TreeVertex) -> TreeVertex | None:
        if p.depth == 0:
            return None
        return TreeVertex(self.pc.prefix(p.path, p.depth - 1))

    def last_letter(self, p: TreeVertex) -> EdgeLetter | None:
        return p.path.syllables[-2] if p.depth else None

    def child(self, p: TreeVertex, t: Word, f: EdgeLetter) -> TreeVertex:
        """The neighbour through coset ``t<alpha(f)>``; may be the parent."""
        if p.depth and not t and f == self.last_letter(p).reverse():
            return self.parent(p)
        syl = p.path.syllables[:-1] + (t, f, Word())
        return TreeVertex(GammaElement(p.path.start, self.spec.terminus(f), syl))

    def is_parent_step(self, p: TreeVertex, t: Word, f: EdgeLetter) -> bool:
        return bool(p.depth) and not t and f == self.last_letter(p).reverse()

    def neighbors(self, p: TreeVertex, cutoff: int | None = None) -> tuple[list[TreeVertex], bool]:
        out = []
        exact = True
        seen = set()
        for f in self.spec.letters_at(p.orbit):
            reps, ex = self.transversal(f, cutoff)
            exact = exact and ex
            for t in reps:
                q = self.child(p, t, f)
                if q not in seen:
                    seen.add(q)
                    out.append(q)
        if p.depth and self.parent(p) not in seen:
            out.insert(0, self.parent(p))
        return out, exact

    def children(self, p: TreeVertex, cutoff: int | None = None) -> list[TreeVertex]:
        par = self.parent(p)
        return [q for q in self.neighbors(p, cutoff)[0] if q != par]

    # -- edge classes

    def class_at_origin(self, t: Word, f: EdgeLetter) -> ParabolicClass:
        """Boundary class, in the vertex at the origin, of the edge ``t<alpha(f)> f``."""
        ld = self._letter[f]
        r = self.root_word(self.spec.origin(f), ld.alpha_index)
        return ParabolicClass(min_coset_rep(t * ld.alpha_conj, r), ld.alpha_index)

    def class_at_terminus(self, f: EdgeLetter) -> ParabolicClass:
        ld = self._letter[f]
        r = self.root_word(self.spec.terminus(f), ld.omega_index)
        return ParabolicClass(min_coset_rep(ld.omega_conj, r), ld.omega_index)

    def parent_edge_classes(self, p: TreeVertex) -> tuple[ParabolicClass, ParabolicClass]:
        """Classes of the edge from ``p`` to its parent, seen at the parent and at ``p``."""
        syl = p.path.syllables
        t, f = syl[-3], syl[-2]
        return self.class_at_origin(t, f), self.class_at_terminus(f)

    def edge_classes(self, p: TreeVertex, q: TreeVertex) -> tuple[ParabolicClass, ParabolicClass]:
        """Classes of the edge ``{p, q}`` seen at ``p`` and at ``q``."""
        if q.depth == p.depth + 1 and self.parent(q) == p:
            a, b = self.parent_edge_classes(q)
            return a, b
        if p.depth == q.depth + 1 and self.parent(p) == q:
            a, b = self.parent_edge_classes(p)
            return b, a
        raise ValueError(f"{p} and {q} are not adjacent")

    def edges_with_class(self, p: TreeVertex, cls: ParabolicClass) -> list[tuple[TreeVertex, ParabolicClass]]:
        """Neighbours of ``p`` across edges whose class at ``p`` is ``cls``, with the far class."""
        r = self.root_word(p.orbit, cls.peripheral_index)
        out = []
        for f in self.spec.letters_at(p.orbit):
            ld = self._letter[f]
            if ld.alpha_index != cls.peripheral_index:
                continue
            a = self.spec.alpha(f)
            for j in range(abs(ld.alpha_power)):
                t = self.pc.coset_rep(cls.coset_rep * r ** j * ld.alpha_conj.inverse(), a)
                q = self.child(p, t, f)
                if q.depth < p.depth:
                    far = self.parent_edge_classes(p)[0]
                else:
                    far = self.class_at_terminus(f)
                out.append((q, far))
        return out

    def canonical_class(self, p: TreeVertex, cls: ParabolicClass) -> tuple[TreeVertex, ParabolicClass]:
        """Move an edge class to the domain vertex nearest the base."""
        while p.depth:
            up, here = self.parent_edge_classes(p)
            if here != cls:
                break
            p, cls = self.parent(p), up
        return p, cls

    # -- metric

    def distance(self, p: TreeVertex, q: TreeVertex) -> int:
        return p.depth + q.depth - 2 * _lcp_steps(p, q)

    def geodesic(self, p: TreeVertex, q: TreeVertex) -> list[TreeVertex]:
        k = _lcp_steps(p, q)
        up = [TreeVertex(self.pc.prefix(p.path, j)) for j in range(p.depth, k - 1, -1)]
        down = [TreeVertex(self.pc.prefix(q.path, j)) for j in range(k + 1, q.depth + 1)]
        return up + down

    def gromov_product(self, p: TreeVertex, q: TreeVertex, base: TreeVertex | None = None) -> int:
        base = self.root if base is None else base
        d = self.distance
        return (d(p, base) + d(q, base) - d(p, q)) // 2

    # -- group action

    def act(self, g: GammaElement, p: TreeVertex) -> TreeVertex:
        return TreeVertex(self.pc.multiply(g, p.path).trimmed())

    def act_with_trace(self, g: GammaElement, p: TreeVertex) -> tuple[TreeVertex, Word]:
        """Image vertex and the vertex-group word carrying traces at ``p`` to traces there."""
        full = self.pc.multiply(g, p.path)
        return TreeVertex(full.trimmed()), full.trailing

    def loop_through(self, p: TreeVertex, w: Word) -> GammaElement:
        """The element ``p w p^-1`` stabilizing ``p``."""
        items = self.pc.items(p.path) + ([w] if w else [])
        items += [s.reverse() if isinstance(s, EdgeLetter) else s.inverse()
                  for s in reversed(self.pc.items(p.path))]
        return self.pc.normal_form(items)

    def element_between(self, p: TreeVertex, w: Word, q: TreeVertex) -> GammaElement:
        """The element ``q w p^-1`` sending ``p`` to ``q``."""
        back = [s.reverse() if isinstance(s, EdgeLetter) else s.inverse()
                for s in reversed(self.pc.items(p.path))]
        items = self.pc.items(q.path) + ([w] if w else []) + back
        return self.pc.normal_form(items)


# --------------------------------------------------------------------------
# balls


@dataclass
class TreeBall:
    center: TreeVertex
    radius: int
    vertices: list[TreeVertex]
    adjacency: dict[TreeVertex, list[TreeVertex]]
    frontier: set[TreeVertex] = field(default_factory=set)
    exact: dict[TreeVertex, bool] = field(default_factory=dict)

    def edges(self) -> list[tuple[TreeVertex, TreeVertex]]:
        out = []
        index = {v: i for i, v in enumerate(self.vertices)}
        for u, nbrs in self.adjacency.items():
            for w in nbrs:
                if index[u] < index[w]:
                    out.append((u, w))
        return out

    def __len__(self) -> int:
        return len(self.vertices)


def tree_ball(tree: BassSerreTree, center: TreeVertex | None = None, radius: int = 1,
              cutoff: int | None = None, budget: int = 100_000) -> TreeBall:
    center = tree.root if center is None else center
    dist = {center: 0}
    order = [center]
    adj: dict[TreeVertex, list[TreeVertex]] = {center: []}
    exact: dict[TreeVertex, bool] = {}
    todo = deque([center])
    while todo:
        u = todo.popleft()
        if dist[u] == radius:
            exact[u] = False
            continue
        nbrs, ex = tree.neighbors(u, cutoff)
        exact[u] = ex
        for w in nbrs:
            if w not in dist:
                if len(order) >= budget:
                    raise BudgetExceeded(f"tree ball exceeds {budget} vertices")
                dist[w] = dist[u] + 1
                order.append(w)
                adj[w] = []
                todo.append(w)
            if w not in adj[u]:
                adj[u].append(w)
                adj[w].append(u)
    frontier = {v for v, d in dist.items() if d == radius}
    return TreeBall(center, radius, order, adj, frontier, exact)


def geodesic(tree: BassSerreTree, p: TreeVertex, q: TreeVertex) -> list[TreeVertex]:
    return tree.geodesic(p, q)


def gromov_product(tree: BassSerreTree, p: TreeVertex, q: TreeVertex, base: TreeVertex | None = None) -> int:
    return tree.gromov_product(p, q, base)


# --------------------------------------------------------------------------
# domains


@dataclass
class DomainView:
    base: TreeVertex
    cls: ParabolicClass
    radius: int
    vertices: list[TreeVertex]
    classes: dict[TreeVertex, ParabolicClass]
    adjacency: dict[TreeVertex, list[TreeVertex]]
    depth_in_domain: dict[TreeVertex, int]
    verdict: str  # "finite", "enumerated to r" or "singleton"
    stabilizer: list[GammaElement] = field(default_factory=list)

    @property
    def finite(self) -> bool:
        return self.verdict in ("finite", "singleton")

    def __contains__(self, v: TreeVertex) -> bool:
        return v in self.classes

    def __len__(self) -> int:
        return len(self.vertices)


def domain_of_class(tree: BassSerreTree, p: TreeVertex, cls: ParabolicClass, radius: int,
                    budget: int = 100_000) -> DomainView:
    """Enumerate the subtree of vertices whose boundary contains the class."""
    p, cls = tree.canonical_class(p, cls)
    classes = {p: cls}
    depth = {p: 0}
    order = [p]
    adj: dict[TreeVertex, list[TreeVertex]] = {p: []}
    todo = deque([p])
    open_frontier = False
    while todo:
        u = todo.popleft()
        nbrs = tree.edges_with_class(u, classes[u])
        for w, c in nbrs:
            if w in classes:
                if w not in adj[u]:
                    adj[u].append(w)
                    adj[w].append(u)
                continue
            if depth[u] == radius:
                open_frontier = True
                continue
            if len(order) >= budget:
                raise BudgetExceeded(f"domain exceeds {budget} vertices")
            classes[w] = c
            depth[w] = depth[u] + 1
            order.append(w)
            adj[w] = [u]
            adj[u].append(w)
            todo.append(w)
    verdict = f"enumerated to {radius}" if open_frontier else "finite"
    view = DomainView(p, cls, radius, order, classes, adj, depth, verdict)
    view.stabilizer = parabolic_stabilizer(tree, p, cls)
    return view


def domain(tree: BassSerreTree, x, radius: int = 3, budget: int = 100_000) -> DomainView:
    """Domain of a boundary point: a subtree for edge classes, a single vertex otherwise."""
    if hasattr(x, "cls") and hasattr(x, "vertex"):
        return domain_of_class(tree, x.vertex, x.cls, radius, budget)
    if hasattr(x, "vertex"):
        v = x.vertex
        return DomainView(v, None, radius, [v], {v: None}, {v: []}, {v: 0}, "singleton")
    raise ValueError("points of the tree boundary have empty domain")


def parabolic_stabilizer(tree: BassSerreTree, p: TreeVertex, cls: ParabolicClass) -> list[GammaElement]:
    """Generators of the stabilizer of an edge class."""
    return domain_quotient(tree, p, cls)[1]


def domain_quotient(tree: BassSerreTree, p: TreeVertex, cls: ParabolicClass):
    """Type representatives of domain vertices and stabilizer generators.

    Domain vertices fall into finitely many types (orbit label, peripheral
    index) and domain edges into one orbit per graph edge. A spanning tree of
    the quotient contributes vertex stabilizers; each further quotient edge
    contributes a pairing element."""
    p, cls = tree.canonical_class(p, cls)
    reps: dict[tuple[str, int], tuple[TreeVertex, ParabolicClass]] = {(p.orbit, cls.peripheral_index): (p, cls)}
    gens: list[GammaElement] = []
    used_edges: set[str] = set()
    todo = deque([(p, cls)])
    while todo:
        u, c = todo.popleft()
        r = tree.root_word(u.orbit, c.peripheral_index)
        gens.append(tree.loop_through(u, c.coset_rep * r * c.coset_rep.inverse()))
        for f in tree.spec.letters_at(u.orbit):
            ld = tree.letter(f)
            if ld.alpha_index != c.peripheral_index or f.edge in used_edges:
                continue
            used_edges.add(f.edge)
            t = tree.pc.coset_rep(c.coset_rep * ld.alpha_conj.inverse(), tree.spec.alpha(f))
            q = tree.child(u, t, f)
            qc = tree.parent_edge_classes(u)[0] if q.depth < u.depth else tree.class_at_terminus(f)
            key = (q.orbit, qc.peripheral_index)
            if key not in reps:
                reps[key] = (q, qc)
                todo.append((q, qc))
            else:
                rq, rc = reps[key]
                g = tree.element_between(rq, qc.coset_rep * rc.coset_rep.inverse(), q)
                gens.append(g)
    return reps, _prune_generators(tree.pc, gens)


def _prune_generators(pc: PathCalculus, gens: list[GammaElement], max_power: int = 6) -> list[GammaElement]:
    gens = [g for g in gens if not g.is_identity()]
    keep: list[GammaElement] = []
    for g in gens:
        if any(_is_power(pc, g, h, max_power) for h in keep):
            continue
        keep = [h for h in keep if not _is_power(pc, h, g, max_power)]
        keep.append(g)
    return keep


def _is_power(pc: PathCalculus, x: GammaElement, y: GammaElement, max_power: int) -> bool:
    yi = pc.invert(y)
    acc, acc_i = y, yi
    for _ in range(max_power):
        if x == acc or x == acc_i:
            return True
        acc, acc_i = pc.multiply(acc, y), pc.multiply(acc_i, yi)
    return False


def trace_power(x: Word, root: Word) -> int:
    return power_of(x, root)


# --------------------------------------------------------------------------
# export


def to_dot(vertices, adjacency, name: str = "T", highlight=()) -> str:
    index = {v: i for i, v in enumerate(vertices)}
    lines = [f"graph {name} {{"]
    marked = set(highlight)
    for v, i in index.items():
        style = ", style=filled" if v in marked else ""
        lines.append(f'  n{i} [label="{v.label}"{style}];')
    for v in vertices:
        for w in adjacency.get(v, ()):
            if w in index and index[v] < index[w]:
                lines.append(f"  n{index[v]} -- n{index[w]};")
    lines.append("}")
    return "\n".join(lines) + "\n"
