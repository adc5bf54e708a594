"""Free-group words, cyclic subgroups and finite models of relative boundaries.

Letters are nonzero ints: ``i`` is the i-th generator, ``-i`` its inverse.
The interchange string form uses ``a, b, c, ...`` for generators and upper
case for inverses, so ``Word.parse("abAB")`` is the commutator ``[a, b]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


def _letter_char(x: int) -> str:
    ch = _ALPHABET[abs(x) - 1]
    return ch if x > 0 else ch.upper()


def _char_letter(ch: str) -> int:
    i = _ALPHABET.find(ch.lower())
    if i < 0:
        raise ValueError(f"not a generator letter: {ch!r}")
    return i + 1 if ch.islower() else -(i + 1)


def _free_reduce(letters: Iterable[int]) -> tuple[int, ...]:
    out: list[int] = []
    for x in letters:
        if x == 0:
            raise ValueError("letter 0 is not a generator")
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


class Word:
    """A freely reduced word. Immutable and hashable."""

    __slots__ = ("letters", "_hash")

    def __init__(self, letters: Iterable[int] = ()):
        self.letters = _free_reduce(letters)
        self._hash = hash(self.letters)

    @classmethod
    def parse(cls, text: str) -> "Word":
        return cls(_char_letter(ch) for ch in text.strip() if ch not in " .·")

    @classmethod
    def _trusted(cls, letters: tuple[int, ...]) -> "Word":
        w = cls.__new__(cls)
        w.letters = letters
        w._hash = hash(letters)
        return w

    def __str__(self) -> str:
        return "".join(_letter_char(x) for x in self.letters)

    def __repr__(self) -> str:
        return f"Word({str(self)!r})"

    def __len__(self) -> int:
        return len(self.letters)

    def __bool__(self) -> bool:
        return bool(self.letters)

    def __iter__(self) -> Iterator[int]:
        return iter(self.letters)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Word._trusted(self.letters[i])
        return self.letters[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, Word) and self.letters == other.letters

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "Word") -> bool:
        return self.shortlex_key() < other.shortlex_key()

    def __mul__(self, other: "Word") -> "Word":
        a, b = self.letters, other.letters
        k = 0
        while k < len(a) and k < len(b) and a[-1 - k] == -b[k]:
            k += 1
        return Word._trusted(a[: len(a) - k] + b[k:])

    def __pow__(self, n: int) -> "Word":
        base = self if n >= 0 else self.inverse()
        out = Word()
        for _ in range(abs(n)):
            out = out * base
        return out

    def inverse(self) -> "Word":
        return Word._trusted(tuple(-x for x in reversed(self.letters)))

    def shortlex_key(self) -> tuple:
        # generator order a < A < b < B < ...
        return (len(self.letters), tuple(2 * abs(x) - (x > 0) for x in self.letters))

    def rank_needed(self) -> int:
        return max((abs(x) for x in self.letters), default=0)

    def is_cyclically_reduced(self) -> bool:
        return len(self.letters) < 2 or self.letters[0] != -self.letters[-1]

    def cyclic_reduction(self) -> tuple["Word", "Word"]:
        """Return ``(u, c)`` with ``self == u * c * u^-1`` and ``c`` cyclically reduced."""
        a = self.letters
        k = 0
        while 2 * k + 1 < len(a) and a[k] == -a[-1 - k]:
            k += 1
        return Word._trusted(a[:k]), Word._trusted(a[k: len(a) - k])

    def rotations(self) -> list["Word"]:
        a = self.letters
        return [Word._trusted(a[i:] + a[:i]) for i in range(len(a))]

    def prefix(self, d: int) -> "Word":
        return Word._trusted(self.letters[:d])


def reduce(letters: Union[str, Iterable[int]]) -> Word:
    if isinstance(letters, str):
        return Word.parse(letters)
    return Word(letters)


def commutator(x: Word, y: Word) -> Word:
    return x * y * x.inverse() * y.inverse()


def reduced_words(rank: int, length: int) -> list[Word]:
    """All reduced words of exactly ``length`` letters, in shortlex order."""
    gens = sorted([g for i in range(1, rank + 1) for g in (i, -i)], key=lambda x: 2 * abs(x) - (x > 0))
    out: list[tuple[int, ...]] = [()]
    for _ in range(length):
        out = [w + (g,) for w in out for g in gens if not w or w[-1] != -g]
    return [Word._trusted(w) for w in out]


def words_up_to(rank: int, length: int) -> list[Word]:
    out: list[Word] = []
    for n in range(length + 1):
        out.extend(reduced_words(rank, n))
    return out


def primitive_root(w: Word) -> tuple[Word, int]:
    """Primitive root of the cyclic reduction of ``w`` and its exponent.

    ``w`` is conjugate (by the conjugator of ``w.cyclic_reduction()``) to
    ``root ** n``.
    """
    if not w:
        raise ValueError("the identity has no primitive root")
    _, c = w.cyclic_reduction()
    m = len(c)
    for p in range(1, m + 1):
        if m % p == 0 and c.letters == c.letters[:p] * (m // p):
            return Word._trusted(c.letters[:p]), m // p
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class CyclicSubgroup:
    """The subgroup ``<root ** n>``; ``root`` is cyclically reduced and primitive."""

    root: Word
    n: int = 1

    def __post_init__(self):
        if not self.root:
            raise ValueError("cyclic subgroup needs a nonempty root")
        if self.n < 1:
            raise ValueError("exponent must be positive")

    @classmethod
    def generated_by(cls, w: Word) -> tuple["CyclicSubgroup", Word]:
        """Split ``<w>`` into a conjugator ``u`` and ``<root^n>`` with ``<w> = u<root^n>u^-1``."""
        u, _ = w.cyclic_reduction()
        root, n = primitive_root(w)
        return cls(root, n), u

    @property
    def generator(self) -> Word:
        return self.root ** self.n

    def __str__(self) -> str:
        return f"<{self.root}>" if self.n == 1 else f"<({self.root})^{self.n}>"


def conjugating_rotation(x: Word, r: Word) -> tuple[Word, int] | None:
    """If cyclically reduced ``x`` is conjugate to ``r`` or ``r^-1`` return ``(s, sign)``
    with ``x == s * r^sign * s^-1``; otherwise None."""
    if len(x) != len(r):
        return None
    for sign, target in ((1, r), (-1, r.inverse())):
        t = target.letters
        for i in range(len(t)):
            if t[i:] + t[:i] == x.letters:
                # rotation by i: x = t[:i]^-1 t t[:i]
                return Word._trusted(t[:i]).inverse(), sign
    return None


def min_coset_rep(g: Word, h: Word) -> Word:
    """Shortlex-minimal element of the left coset ``g<h>``."""
    if not h:
        return g
    u, c = h.cyclic_reduction()
    # |g h^k| grows linearly once |k| exceeds this window
    span = (len(g) + 2 * len(u)) // max(len(c), 1) + 2
    best = g
    bk = best.shortlex_key()
    hp = Word()
    hm = Word()
    hi = h.inverse()
    for _ in range(span):
        hp = hp * h
        hm = hm * hi
        for cand in (g * hp, g * hm):
            k = cand.shortlex_key()
            if k < bk:
                best, bk = cand, k
    return best


def same_coset(g1: Word, g2: Word, h: Word) -> bool:
    return min_coset_rep(g1, h) == min_coset_rep(g2, h)


# --------------------------------------------------------------------------
# boundary points of a free group with a collapsed peripheral family


@dataclass(frozen=True)
class PeriodicEnd:
    """The end ``prefix * period^infinity``."""

    prefix: Word
    period: Word

    def __post_init__(self):
        if not self.period:
            raise ValueError("period must be nonempty")

    def letters(self, d: int) -> Word:
        if not self.period.is_cyclically_reduced():
            return self.normalized().letters(d)
        k = (len(self.prefix) + d) // len(self.period) + 2
        return (self.prefix * self.period ** k).prefix(d)

    def normalized(self) -> "PeriodicEnd":
        """Shortest prefix, primitive cyclically reduced period."""
        u, c = self.period.cyclic_reduction()
        root, _ = primitive_root(c)
        # prefix * u * c^oo; c^oo = root^oo
        pre = self.prefix * u
        while pre and pre.letters[-1] == -root.letters[0]:
            pre = pre[:-1]
            root = Word._trusted(root.letters[1:] + root.letters[:1])
        # absorb trailing copies of the period into the prefix tail
        changed = True
        while changed:
            changed = False
            # shift prefix ending with last letter of root: pre = q x, root = y x -> q (x y)^oo
            if pre and pre.letters[-1] == root.letters[-1]:
                pre = pre[:-1]
                root = Word._trusted((root.letters[-1],) + root.letters[:-1])
                changed = True
        return PeriodicEnd(pre, root)

    def __str__(self) -> str:
        return f"{self.prefix}({self.period})^oo"


@dataclass(frozen=True)
class ParabolicClass:
    """The collapsed point ``coset_rep * Fix(peripheral root)``."""

    coset_rep: Word
    peripheral_index: int

    def __str__(self) -> str:
        return f"{self.coset_rep or 'e'}.P{self.peripheral_index}"


@dataclass(frozen=True)
class TruncatedEnd:
    """An end known only through its first ``len(prefix)`` letters."""

    prefix: Word

    def letters(self, d: int) -> Word:
        if d > len(self.prefix):
            raise ValueError("truncated end is not resolved at this depth")
        return self.prefix.prefix(d)

    def __str__(self) -> str:
        return f"{self.prefix}..."


FreeBoundaryPoint = Union[PeriodicEnd, ParabolicClass, TruncatedEnd]


@dataclass(frozen=True)
class VertexGroupSpec:
    rank: int
    peripherals: tuple[CyclicSubgroup, ...] = ()

    @classmethod
    def from_words(cls, rank: int, peripherals: Sequence[str | Word]) -> "VertexGroupSpec":
        subs = []
        for p in peripherals:
            w = Word.parse(p) if isinstance(p, str) else p
            c, _ = CyclicSubgroup.generated_by(w)
            subs.append(c)
        return cls(rank, tuple(subs))

    def root(self, i: int) -> Word:
        return self.peripherals[i].root

    def with_peripheral(self, c: CyclicSubgroup) -> "VertexGroupSpec":
        return VertexGroupSpec(self.rank, self.peripherals + (c,))


def fixed_ends(c: CyclicSubgroup, conjugator: Word = Word()) -> tuple[PeriodicEnd, PeriodicEnd]:
    return (PeriodicEnd(conjugator, c.root).normalized(),
            PeriodicEnd(conjugator, c.root.inverse()).normalized())


def peripheral_of(spec: VertexGroupSpec, w: Word) -> tuple[int, Word, int, int] | None:
    """Locate ``<w>`` inside the peripheral family.

    Returns ``(index, s, sign, n)`` with ``w == s * root_index^(sign*n) * s^-1``,
    or None when no power of ``w`` is conjugate into a peripheral."""
    u, c = w.cyclic_reduction()
    root, n = primitive_root(w)
    for i, p in enumerate(spec.peripherals):
        hit = conjugating_rotation(root, p.root)
        if hit is not None:
            s, sign = hit
            return i, u * s, sign, n
    return None


def class_of_coset(spec: VertexGroupSpec, g: Word, i: int) -> ParabolicClass:
    return ParabolicClass(min_coset_rep(g, spec.root(i)), i)


def end_directions(spec: VertexGroupSpec, p: ParabolicClass) -> tuple[PeriodicEnd, PeriodicEnd]:
    r = spec.root(p.peripheral_index)
    return (PeriodicEnd(p.coset_rep, r), PeriodicEnd(p.coset_rep, r.inverse()))


def point_prefixes(spec: VertexGroupSpec, p: FreeBoundaryPoint, d: int) -> tuple[Word, ...]:
    """Depth-``d`` cylinders containing the representatives of ``p``."""
    if isinstance(p, ParabolicClass):
        a, b = end_directions(spec, p)
        return (a.letters(d), b.letters(d))
    return (p.letters(d),)


def canonicalize_point(p: FreeBoundaryPoint, spec: VertexGroupSpec) -> FreeBoundaryPoint:
    """Collapse periodic ends whose period is peripheral to their parabolic class."""
    if isinstance(p, ParabolicClass):
        return ParabolicClass(min_coset_rep(p.coset_rep, spec.root(p.peripheral_index)),
                              p.peripheral_index)
    if isinstance(p, TruncatedEnd):
        return p
    q = p.normalized()
    hit = peripheral_of(spec, q.period)
    if hit is None:
        return q
    i, s, _sign, _n = hit
    return class_of_coset(spec, q.prefix * s, i)


# --------------------------------------------------------------------------
# malnormality


@dataclass
class MalnormalReport:
    ok: bool
    violations: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def malnormal_family_check(spec: VertexGroupSpec) -> MalnormalReport:
    violations = []
    for i, p in enumerate(spec.peripherals):
        root, n = primitive_root(p.generator)
        if n != 1:
            violations.append(f"peripheral {i} {p} is not maximal: root {root}")
        if root.rank_needed() > spec.rank:
            violations.append(f"peripheral {i} uses generators beyond rank {spec.rank}")
    for i in range(len(spec.peripherals)):
        for j in range(i + 1, len(spec.peripherals)):
            if conjugating_rotation(spec.root(i), spec.root(j)) is not None:
                violations.append(f"peripherals {i} and {j} are conjugate")
    return MalnormalReport(not violations, violations)


# --------------------------------------------------------------------------
# Stallings folding


class StallingsGraph:
    """Folded core graph of a finitely generated subgroup of a free group."""

    def __init__(self, generators: Sequence[Word]):
        if not generators:
            raise ValueError("need at least one generator")
        self.out: list[dict[int, int]] = [{}]
        self.parent: list[int] = [0]
        for g in generators:
            if not g:
                continue
            cur = 0
            for k, x in enumerate(g.letters):
                nxt = 0 if k == len(g) - 1 else self._new()
                self._add(cur, x, nxt)
                cur = nxt

    def _new(self) -> int:
        self.out.append({})
        self.parent.append(len(self.parent))
        return len(self.out) - 1

    def _find(self, v: int) -> int:
        while self.parent[v] != v:
            self.parent[v] = self.parent[self.parent[v]]
            v = self.parent[v]
        return v

    def _add(self, u: int, x: int, v: int) -> None:
        todo = [(u, x, v)]
        while todo:
            u, x, v = todo.pop()
            u, v = self._find(u), self._find(v)
            for a, y, b in ((u, x, v), (v, -x, u)):
                t = self.out[a].get(y)
                if t is None:
                    self.out[a][y] = b
                    continue
                t = self._find(t)
                if t == b:
                    continue
                # fold: identify t and b, replaying b's edges onto the survivor
                keep, gone = min(t, b), max(t, b)
                self.parent[gone] = keep
                moved = self.out[gone]
                self.out[gone] = {}
                todo.extend((keep, z, w) for z, w in moved.items())
                todo.append((a, y, keep))
                break

    def step(self, v: int, x: int) -> int | None:
        t = self.out[self._find(v)].get(x)
        return None if t is None else self._find(t)

    def read(self, w: Word, start: int = 0) -> int | None:
        v: int | None = self._find(start)
        for x in w.letters:
            v = self.step(v, x)
            if v is None:
                return None
        return v

    def contains(self, w: Word) -> bool:
        return self.read(w) == self._find(0)

    def reads_end(self, p: "PeriodicEnd") -> bool:
        """Whether the infinite word of ``p`` is readable from the base point."""
        v = self.read(p.prefix)
        seen = set()
        while v is not None and v not in seen:
            seen.add(v)
            v = self.read(p.period, v)
        return v is not None


def subgroup_membership(generators: Sequence[Word], w: Word) -> bool:
    return StallingsGraph(generators).contains(w)


# --------------------------------------------------------------------------
# cylinder identification graphs


@dataclass(frozen=True)
class Cylinder:
    prefix: Word

    @property
    def depth(self) -> int:
        return len(self.prefix)

    def contains(self, w: Word) -> bool:
        return w.letters[: len(self.prefix)] == self.prefix.letters


def classes_crossing(spec: VertexGroupSpec, d: int) -> list[tuple[ParabolicClass, Word, Word]]:
    """Parabolic classes whose two ends lie in distinct depth-``d`` cylinders.

    A class with shortlex-minimal representative ``g`` keeps the first
    ``|g| - |root|/2`` letters of ``g`` on both ends, so longer
    representatives never cross."""
    out = []
    for i, p in enumerate(spec.peripherals):
        r = p.root
        seen = set()
        for g in words_up_to(spec.rank, d + len(r) // 2 + 1):
            cls = class_of_coset(spec, g, i)
            if cls in seen:
                continue
            seen.add(cls)
            x, y = point_prefixes(spec, cls, d)
            if x != y:
                out.append((cls, x, y))
    out.sort(key=lambda t: (t[0].peripheral_index, t[0].coset_rep.shortlex_key()))
    return out


_CROSSING_CACHE: dict = {}


def crossing_cached(spec: VertexGroupSpec, d: int):
    key = (spec, d)
    if key not in _CROSSING_CACHE:
        _CROSSING_CACHE[key] = classes_crossing(spec, d)
    return _CROSSING_CACHE[key]


def vertex_components(spec: VertexGroupSpec, d: int,
                      removed: Iterable[ParabolicClass] = ()) -> int:
    """Connected components of the depth-``d`` cylinder identification graph."""
    if d < 2:
        raise ValueError("depth must be at least 2")
    for p in spec.peripherals:
        if d < 2 or len(p.root) > 2 * d + 1:
            raise ValueError(f"depth {d} too small to resolve peripheral period {p.root}")
    nodes = reduced_words(spec.rank, d)
    index = {w: k for k, w in enumerate(nodes)}
    gone = set()
    for cls in removed:
        gone.update(point_prefixes(spec, canonicalize_point(cls, spec), d))
    rows, cols = [], []
    for _cls, x, y in crossing_cached(spec, d):
        if x in gone or y in gone:
            continue
        rows.append(index[x])
        cols.append(index[y])
    keep = np.array([w not in gone for w in nodes])
    n = len(nodes)
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    return len(set(labels[keep].tolist()))


def cylinder_ultrametric(x: Word, y: Word) -> float:
    k = 0
    while k < len(x) and k < len(y) and x[k] == y[k]:
        k += 1
    return 0.0 if x == y else 2.0 ** (-k)


def all_cylinders(rank: int, d: int) -> list[Cylinder]:
    return [Cylinder(w) for w in reduced_words(rank, d)]


def common_prefix_length(x: Sequence, y: Sequence) -> int:
    k = 0
    for a, b in zip(x, y):
        if a != b:
            break
        k += 1
    return k


__all__ = [
    "Word", "reduce", "commutator", "primitive_root", "CyclicSubgroup", "VertexGroupSpec",
    "PeriodicEnd", "ParabolicClass", "TruncatedEnd", "FreeBoundaryPoint", "Cylinder",
    "fixed_ends", "canonicalize_point", "malnormal_family_check", "subgroup_membership",
    "StallingsGraph", "vertex_components", "min_coset_rep", "reduced_words", "words_up_to",
    "point_prefixes", "class_of_coset", "peripheral_of", "end_directions"
]
