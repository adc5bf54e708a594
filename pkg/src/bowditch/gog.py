"""Splittings of free groups over cyclic subgroups: path calculus and normal forms.

Group elements are normal forms in the path groupoid of the graph of groups:
an alternating sequence ``g0 e1 g1 ... ek gk`` of vertex-group words and
oriented edge letters, read from the base vertex. Tree edges and non-tree
edges are both kept as letters, so a loop is an element of the fundamental
group and a path ending anywhere, modulo its final vertex group, is a vertex
of the Bass-Serre tree.

Each non-final word ``g_{i-1}`` is the shortlex-minimal representative of its
coset ``g<alpha(e_i)>``; the edge relation used to move the remainder across
an edge is ``alpha(e)^m e = e omega(e)^m``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence, Union

from .freegrp import (
    CyclicSubgroup,
    VertexGroupSpec,
    Word,
    malnormal_family_check,
    min_coset_rep,
    peripheral_of,
    primitive_root,
)


class EdgeLetter(NamedTuple):
    edge: str
    sign: int  # +1 traverses v -> w

    def reverse(self) -> "EdgeLetter":
        return EdgeLetter(self.edge, -self.sign)

    def __str__(self) -> str:
        return (">" if self.sign > 0 else "<") + self.edge


@dataclass(frozen=True)
class EdgeSpec:
    id: str
    v: str
    w: str
    image_v: Word
    image_w: Word
    in_tree: bool = True


@dataclass(frozen=True)
class GraphOfGroupsSpec:
    vertices: tuple[tuple[str, VertexGroupSpec], ...]
    edges: tuple[EdgeSpec, ...]
    base: str = ""
    name: str = ""

    def __post_init__(self):
        if not self.base and self.vertices:
            object.__setattr__(self, "base", self.vertices[0][0])

    @cached_property
    def _vmap(self) -> dict[str, VertexGroupSpec]:
        return dict(self.vertices)

    @cached_property
    def _emap(self) -> dict[str, EdgeSpec]:
        return {e.id: e for e in self.edges}

    def vertex(self, v: str) -> VertexGroupSpec:
        return self._vmap[v]

    def edge(self, e: str) -> EdgeSpec:
        return self._emap[e]

    @property
    def vertex_ids(self) -> list[str]:
        return [v for v, _ in self.vertices]

    def replace_vertex(self, v: str, spec: VertexGroupSpec) -> "GraphOfGroupsSpec":
        verts = tuple((u, spec if u == v else s) for u, s in self.vertices)
        return GraphOfGroupsSpec(verts, self.edges, self.base, self.name)

    # -- oriented edge letters

    def origin(self, f: EdgeLetter) -> str:
        e = self.edge(f.edge)
        return e.v if f.sign > 0 else e.w

    def terminus(self, f: EdgeLetter) -> str:
        e = self.edge(f.edge)
        return e.w if f.sign > 0 else e.v

    def alpha(self, f: EdgeLetter) -> Word:
        e = self.edge(f.edge)
        return e.image_v if f.sign > 0 else e.image_w

    def omega(self, f: EdgeLetter) -> Word:
        e = self.edge(f.edge)
        return e.image_w if f.sign > 0 else e.image_v

    def letters_at(self, v: str) -> list[EdgeLetter]:
        out = []
        for e in self.edges:
            if e.v == v:
                out.append(EdgeLetter(e.id, 1))
            if e.w == v:
                out.append(EdgeLetter(e.id, -1))
        return out

    # -- serialization

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "base": self.base,
            "vertices": [
                {"id": v, "rank": s.rank, "peripherals": [str(p.generator) for p in s.peripherals]}
                for v, s in self.vertices
            ],
            "edges": [
                {"id": e.id, "v": e.v, "w": e.w, "image_v": str(e.image_v),
                 "image_w": str(e.image_w), "in_tree": e.in_tree}
                for e in self.edges
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GraphOfGroupsSpec":
        verts = []
        for item in data["vertices"]:
            peripherals = tuple(
                CyclicSubgroup(*_root_and_power(Word.parse(p))) for p in item.get("peripherals", [])
            )
            verts.append((str(item["id"]), VertexGroupSpec(int(item["rank"]), peripherals)))
        edges = tuple(
            EdgeSpec(str(e["id"]), str(e["v"]), str(e["w"]), Word.parse(e["image_v"]),
                     Word.parse(e["image_w"]), bool(e.get("in_tree", True)))
            for e in data["edges"]
        )
        return cls(tuple(verts), edges, str(data.get("base", "")), str(data.get("name", "")))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GraphOfGroupsSpec":
        return cls.from_dict(json.loads(text))


def _root_and_power(w: Word) -> tuple[Word, int]:
    # peripherals are stored up to conjugacy by their cyclically reduced root
    if not w:
        raise ValueError("empty peripheral generator")
    return primitive_root(w)


# --------------------------------------------------------------------------
# validation and parabolization


@dataclass(frozen=True)
class Parabolic:
    peripheral: int
    index: int
    conjugator: Word  # image == conjugator * root^(sign*index) * conjugator^-1
    sign: int

    def __str__(self) -> str:
        return f"Parabolic(P{self.peripheral}, index {self.index})"


@dataclass(frozen=True)
class Loxodromic:
    def __str__(self) -> str:
        return "Loxodromic"


EndpointStatus = Union[Parabolic, Loxodromic]


@dataclass
class ValidationReport:
    ok: bool
    problems: list[str] = field(default_factory=list)
    statuses: dict[tuple[str, str], EndpointStatus] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok


def endpoint_status(vspec: VertexGroupSpec, image: Word) -> EndpointStatus:
    hit = peripheral_of(vspec, image)
    if hit is None:
        return Loxodromic()
    i, s, sign, n = hit
    return Parabolic(i, n, s, sign)


def edge_status(spec: GraphOfGroupsSpec, e: EdgeSpec) -> tuple[EndpointStatus, EndpointStatus]:
    return (endpoint_status(spec.vertex(e.v), e.image_v), endpoint_status(spec.vertex(e.w), e.image_w))


def validate(spec: GraphOfGroupsSpec) -> ValidationReport:
    problems: list[str] = []
    statuses: dict[tuple[str, str], EndpointStatus] = {}
    ids = spec.vertex_ids
    if not ids:
        return ValidationReport(False, ["graph has no vertices"])
    if len(set(ids)) != len(ids):
        problems.append("duplicate vertex ids")
    if len({e.id for e in spec.edges}) != len(spec.edges):
        problems.append("duplicate edge ids")
    if spec.base not in ids:
        problems.append(f"base vertex {spec.base!r} is not a vertex")
    for v, vs in spec.vertices:
        rep = malnormal_family_check(vs)
        problems.extend(f"vertex {v}: {msg}" for msg in rep.violations)
    for e in spec.edges:
        if e.v not in ids or e.w not in ids:
            problems.append(f"edge {e.id} has an unknown endpoint")
            continue
        for end, img in ((e.v, e.image_v), (e.w, e.image_w)):
            if not img:
                problems.append(f"edge {e.id}: trivial image in {end}; edge groups must be infinite")
            elif img.rank_needed() > spec.vertex(end).rank:
                problems.append(f"edge {e.id}: image {img} uses generators beyond rank of {end}")
        if e.image_v and e.image_w and not problems:
            sv, sw = edge_status(spec, e)
            statuses[(e.id, "v")] = sv
            statuses[(e.id, "w")] = sw
    # connectivity and spanning tree
    adj: dict[str, set[str]] = {v: set() for v in ids}
    tree_adj: dict[str, set[str]] = {v: set() for v in ids}
    for e in spec.edges:
        if e.v in adj and e.w in adj:
            adj[e.v].add(e.w)
            adj[e.w].add(e.v)
            if e.in_tree:
                tree_adj[e.v].add(e.w)
                tree_adj[e.w].add(e.v)
    if _reach(adj, ids[0]) != set(ids):
        problems.append("graph is not connected")
    if _reach(tree_adj, ids[0]) != set(ids):
        problems.append("maximal tree does not span the vertices")
    n_tree = sum(1 for e in spec.edges if e.in_tree)
    if n_tree != len(ids) - 1:
        problems.append(f"maximal tree has {n_tree} edges, expected {len(ids) - 1}")
    if any(e.in_tree and e.v == e.w for e in spec.edges):
        problems.append("a loop edge cannot lie in the maximal tree")
    return ValidationReport(not problems, problems, statuses)


def _reach(adj: dict[str, set[str]], start: str) -> set[str]:
    seen = {start}
    todo = [start]
    while todo:
        u = todo.pop()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


class ScenarioError(ValueError):
    pass


def parabolize(spec: GraphOfGroupsSpec) -> GraphOfGroupsSpec:
    """Add the maximal cyclic subgroup of every loxodromic edge image as a peripheral."""
    rep = validate(spec)
    if not rep:
        raise ScenarioError("; ".join(rep.problems))
    out = spec
    for e in spec.edges:
        for end, img in ((e.v, e.image_v), (e.w, e.image_w)):
            vs = out.vertex(end)
            if isinstance(endpoint_status(vs, img), Loxodromic):
                root, _ = primitive_root(img)
                extended = vs.with_peripheral(CyclicSubgroup(root, 1))
                check = malnormal_family_check(extended)
                if not check:
                    raise ScenarioError(f"vertex {end}: " + "; ".join(check.violations))
                out = out.replace_vertex(end, extended)
    return out


def is_parabolized(spec: GraphOfGroupsSpec) -> bool:
    return all(isinstance(s, Parabolic) for e in spec.edges for s in edge_status(spec, e))


# --------------------------------------------------------------------------
# normal forms


Item = Union[Word, EdgeLetter]


@dataclass(frozen=True)
class GammaElement:
    """A reduced path ``g0 e1 g1 ... ek gk`` from ``start`` to ``end``."""

    start: str
    end: str
    syllables: tuple  # alternating Word, EdgeLetter, ..., Word

    @property
    def edge_letters(self) -> tuple[EdgeLetter, ...]:
        return self.syllables[1::2]

    @property
    def words(self) -> tuple[Word, ...]:
        return self.syllables[0::2]

    @property
    def trailing(self) -> Word:
        return self.syllables[-1]

    @property
    def length(self) -> int:
        return len(self.syllables) // 2

    def is_identity(self) -> bool:
        return len(self.syllables) == 1 and not self.syllables[0] and self.start == self.end

    def trimmed(self) -> "GammaElement":
        return GammaElement(self.start, self.end, self.syllables[:-1] + (Word(),))

    def __str__(self) -> str:
        parts = []
        for s in self.syllables:
            if isinstance(s, EdgeLetter):
                parts.append(str(s))
            elif s:
                parts.append(str(s))
        return " ".join(parts) if parts else "1"


def parse_items(text: str) -> list[Item]:
    items: list[Item] = []
    for tok in text.replace(".", " ").split():
        if tok[0] in "<>":
            items.append(EdgeLetter(tok[1:], 1 if tok[0] == ">" else -1))
        elif tok == "1":
            continue
        else:
            items.append(Word.parse(tok))
    return items


class PathCalculus:
    """Normal forms, products and inverses in the path groupoid of ``spec``."""

    def __init__(self, spec: GraphOfGroupsSpec):
        self.spec = spec
        self._tree_paths = self._maximal_tree_paths()
        self._coset_cache: dict[tuple[Word, Word], Word] = {}

    # -- structure

    def _maximal_tree_paths(self) -> dict[str, tuple[EdgeLetter, ...]]:
        paths = {self.spec.base: ()}
        todo = [self.spec.base]
        while todo:
            u = todo.pop(0)
            for f in self.spec.letters_at(u):
                if not self.spec.edge(f.edge).in_tree:
                    continue
                t = self.spec.terminus(f)
                if t not in paths:
                    paths[t] = paths[u] + (f,)
                    todo.append(t)
        return paths

    def tree_path(self, v: str) -> tuple[EdgeLetter, ...]:
        return self._tree_paths[v]

    def coset_rep(self, g: Word, h: Word) -> Word:
        key = (g, h)
        r = self._coset_cache.get(key)
        if r is None:
            r = min_coset_rep(g, h)
            if len(self._coset_cache) > 200_000:
                self._coset_cache.clear()
            self._coset_cache[key] = r
        return r

    def prefix(self, x: GammaElement, k: int) -> GammaElement:
        """The sub-path through the first ``k`` edges with the trailing word dropped."""
        syl = x.syllables[: 2 * k] + (Word(),)
        return GammaElement(x.start, self.end_of(x.start, syl), syl)

    def end_of(self, start: str, syllables: Sequence) -> str:
        cur = start
        for s in syllables[1::2]:
            cur = self.spec.terminus(s)
        return cur

    # -- construction

    def identity(self, v: str | None = None) -> GammaElement:
        v = self.spec.base if v is None else v
        return GammaElement(v, v, (Word(),))

    def normal_form(self, items: Iterable[Item] | str, start: str | None = None) -> GammaElement:
        if isinstance(items, str):
            items = parse_items(items)
        start = self.spec.base if start is None else start
        syl: list = [Word()]
        cur = start
        for it in items:
            if isinstance(it, Word):
                if it.rank_needed() > self.spec.vertex(cur).rank:
                    raise ValueError(f"word {it} is not in the vertex group of {cur}")
                syl[-1] = syl[-1] * it
            elif isinstance(it, EdgeLetter):
                if self.spec.origin(it) != cur:
                    raise ValueError(f"edge letter {it} does not start at vertex {cur}")
                cur = self._append_edge(syl, it)
            else:
                raise TypeError(f"unexpected item {it!r}")
        return GammaElement(start, cur, tuple(syl))

    def _append_edge(self, syl: list, f: EdgeLetter) -> str:
        a = self.spec.alpha(f)
        g = syl[-1]
        t = self.coset_rep(g, a)
        m = _power_of(t.inverse() * g, a)
        if len(syl) > 1 and syl[-2] == f.reverse() and not t:
            prev = syl[-2]
            syl.pop()
            syl.pop()
            syl[-1] = syl[-1] * self.spec.alpha(prev) ** m
            return self.spec.terminus(syl[-2]) if len(syl) > 1 else self._start_of(syl, prev)
        syl[-1] = t
        syl.append(f)
        syl.append(self.spec.omega(f) ** m)
        return self.spec.terminus(f)

    def _start_of(self, syl: list, popped: EdgeLetter) -> str:
        # the path collapsed to its start vertex, which is the origin of the popped letter
        return self.spec.origin(popped)

    def items(self, x: GammaElement) -> list[Item]:
        return [s for s in x.syllables if isinstance(s, EdgeLetter) or s]

    def multiply(self, x: GammaElement, y: GammaElement) -> GammaElement:
        if x.end != y.start:
            raise ValueError(f"cannot compose a path ending at {x.end} with one starting at {y.start}")
        return self.normal_form(self.items(x) + self.items(y), start=x.start)

    def invert(self, x: GammaElement) -> GammaElement:
        out: list[Item] = []
        for s in reversed(x.syllables):
            out.append(s.reverse() if isinstance(s, EdgeLetter) else s.inverse())
        return self.normal_form([s for s in out if isinstance(s, EdgeLetter) or s], start=x.end)

    def power(self, x: GammaElement, n: int) -> GammaElement:
        base = x if n >= 0 else self.invert(x)
        out = self.identity(x.start)
        for _ in range(abs(n)):
            out = self.multiply(out, base)
        return out

    def vertex_element(self, v: str, w: Word | str) -> GammaElement:
        """The element of the base-point group given by ``w`` in the vertex group of ``v``."""
        if isinstance(w, str):
            w = Word.parse(w)
        path = list(self.tree_path(v))
        back = [f.reverse() for f in reversed(path)]
        return self.normal_form(path + [w] + back)

    def stable_letter(self, edge: str) -> GammaElement:
        e = self.spec.edge(edge)
        f = EdgeLetter(edge, 1)
        go = list(self.tree_path(e.v))
        back = [g.reverse() for g in reversed(self.tree_path(e.w))]
        return self.normal_form(go + [f] + back)

    def path_to_loop(self, p: GammaElement) -> GammaElement:
        """Close a path from the base by returning along the maximal tree."""
        back = [g.reverse() for g in reversed(self.tree_path(p.end))]
        return self.normal_form(self.items(p) + back, start=p.start)

    def lift_vertex(self, v: str) -> GammaElement:
        """The tree vertex reached from the base along the maximal tree."""
        return self.normal_form(list(self.tree_path(v))).trimmed()

    def has_pinch(self, x: GammaElement) -> bool:
        """Independent scan for a subword ``e g e^-1`` with ``g`` in the image of ``e``."""
        syl = x.syllables
        for k in range(1, len(syl) - 2, 2):
            e, g, f = syl[k], syl[k + 1], syl[k + 2]
            if f == e.reverse():
                om = self.spec.omega(e)
                try:
                    _power_of(g, om)
                    return True
                except ValueError:
                    pass
        # transversal condition
        for k in range(0, len(syl) - 1, 2):
            t, f = syl[k], syl[k + 1]
            if self.coset_rep(t, self.spec.alpha(f)) != t:
                return True
        return False


def _power_of(x: Word, h: Word) -> int:
    """The integer ``m`` with ``x == h^m``; ValueError if there is none."""
    if not x:
        return 0
    u, c = h.cyclic_reduction()
    core = u.inverse() * x * u
    if len(core) % len(c):
        raise ValueError(f"{x} is not a power of {h}")
    m = len(core) // len(c)
    if core == c ** m:
        return m
    if core == c ** (-m):
        return -m
    raise ValueError(f"{x} is not a power of {h}")


def power_of(x: Word, h: Word) -> int:
    return _power_of(x, h)


def load_spec(path) -> GraphOfGroupsSpec:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return GraphOfGroupsSpec.from_dict(data)
