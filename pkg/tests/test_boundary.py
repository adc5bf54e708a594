import random
from collections import deque

import pytest

from bowditch.boundary import (
    EdgeParabolic,
    NeighborhoodSpec,
    OpenSet,
    TreeEnd,
    Undecidable,
    VertexPoint,
    cylinders_of,
    parse_point,
    points_near,
    random_loxodromic,
    sample_points,
)
from bowditch.dynamics import act
from bowditch.freegrp import ParabolicClass, PeriodicEnd, TruncatedEnd, VertexGroupSpec, Word, end_directions
from bowditch.gog import EdgeLetter
from bowditch.tree import tree_ball

E = EdgeLetter("e", 1)


def base_edge(m):
    t = m.tree
    return t.root, t.child(t.root, Word(), E)


def bfs_parents(ball):
    parent = {ball.center: None}
    todo = deque([ball.center])
    while todo:
        u = todo.popleft()
        for w in ball.adjacency[u]:
            if w not in parent:
                parent[w] = u
                todo.append(w)
    return parent


def path_from_root(parent, v):
    out = [v]
    while parent[out[-1]] is not None:
        out.append(parent[out[-1]])
    return out[::-1]


def prefixes_contain(prefixes, spec, x, d):
    """Direct cylinder test: every end of x starts with one of the prefixes."""
    ends = end_directions(spec, x) if isinstance(x, ParabolicClass) else (x,)
    return all(any(str(e.letters(d)).startswith(str(p)) for p in prefixes) for e in ends)


# -- gluing

def test_glue_identifies_edge_classes(model):
    m = model("ex73_i")
    left, right = base_edge(m)
    cls = ParabolicClass(Word(), 0)
    assert m.glue(left, cls) == m.glue(right, cls)
    assert isinstance(m.glue(left, cls), EdgeParabolic)


def test_glue_free_end_is_vertex_point(model):
    m = model("ex73_i")
    p = m.glue(m.tree.root, PeriodicEnd(Word(), Word.parse("a")))
    assert isinstance(p, VertexPoint)


def test_glue_canonicalizes_peripheral_period(model):
    m = model("ex73_i")
    p = m.glue(m.tree.root, PeriodicEnd(Word.parse("a"), Word.parse("abAB")))
    assert isinstance(p, EdgeParabolic)


def test_domain_ray_folds_to_edge_class(model):
    # the product of the two stabilizer roots translates along the domain line
    m = model("ex73_ii")
    left, right = base_edge(m)
    g = m.pc.multiply(m.pc.vertex_element("L", "abAB"), m.tree.loop_through(right, Word.parse("abAB")))
    assert m.translation_length(g) > 0
    p = m.tree_end(g)
    assert isinstance(p, EdgeParabolic)
    assert p == m.edge_point(left, right)


def test_projection_injective(model):
    m = model("ex74")
    rng = random.Random(11)
    for v in tree_ball(m.tree, radius=2).vertices[:10]:
        seen = {}
        for _ in range(30):
            x = PeriodicEnd(Word.parse("".join(rng.choice("aAbB") for _ in range(3))), Word.parse(rng.choice(["a", "b", "ab", "aB"])))
            x = x.normalized()
            p = m.glue(v, x)
            key = x.letters(20)
            if key in seen:
                assert seen[key] == p
            else:
                assert p not in seen.values() or isinstance(p, EdgeParabolic)
                seen[key] = p


# -- tree ends

def test_tree_end_power_and_conjugate_equal(model):
    m = model("ex74")
    rng = random.Random(12)
    for _ in range(20):
        g = random_loxodromic(m, rng)
        p = m.tree_end(g)
        if not isinstance(p, TreeEnd):
            continue
        assert m.tree_end(m._power(g, 2)) == p
        assert m.tree_end(m.pc.invert(g)) != p


def test_ray_is_geodesic(model):
    m = model("ex73_i")
    rng = random.Random(13)
    g = random_loxodromic(m, rng)
    ray = m.ray(m.tree_end(g), 12)
    for k, v in enumerate(ray):
        assert m.tree.distance(m.tree.root, v) == k
    assert all(m.tree.distance(a, b) == 1 for a, b in zip(ray, ray[1:]))


def test_truncated_end_undecidable_beyond_path(model):
    m = model("ex73_i")
    v = tree_ball(m.tree, radius=2).vertices[-1]
    end = m.truncated_end(v)
    with pytest.raises(Undecidable):
        m.ray(end, v.depth + 1)


# -- open sets

def test_open_set_parabolic_needs_both_ends():
    spec = VertexGroupSpec.from_words(2, ["abAB"])
    cls = ParabolicClass(Word(), 0)
    assert OpenSet.of([Word.parse("ab"), Word.parse("ba")]).contains(spec, cls) is True
    assert OpenSet.of([Word.parse("ab")]).contains(spec, cls) is False
    assert OpenSet.of([Word.parse("abA")]).contains(spec, TruncatedEnd(Word.parse("ab"))) is None


# -- neighbourhood membership

def test_membership_tree_end_neighborhood_oracle(model):
    m = model("ex73_i")
    rng = random.Random(14)
    ball = tree_ball(m.tree, radius=3)
    parent = bfs_parents(ball)
    for _ in range(10):
        eta = m.tree_end(random_loxodromic(m, rng))
        if not isinstance(eta, TreeEnd):
            continue
        for mm in (0, 1, 2):
            W = NeighborhoodSpec(eta, m=mm)
            gate = m.ray(eta, mm + 1)[mm + 1]
            for v in rng.sample(ball.vertices, 40):
                q = m.glue(v, PeriodicEnd(Word(), Word.parse("a")))
                expected = gate in path_from_root(parent, v)
                assert m.in_neighborhood(q, W) is expected


def test_membership_vertex_neighborhood_oracle(model):
    m = model("ex73_i")
    t = m.tree
    rng = random.Random(15)
    ball = tree_ball(t, radius=2)
    parent = bfs_parents(ball)
    spec = m.vspec(t.root)
    for _ in range(10):
        x = PeriodicEnd(Word.parse(rng.choice(["a", "b", "aB", "Ab"])), Word.parse(rng.choice(["a", "b"]))).normalized()
        p = m.glue(t.root, x)
        d = rng.randint(1, 3)
        W = NeighborhoodSpec(p, ((t.root, cylinders_of(spec, x, d)),))
        prefixes = [x.letters(d)]
        for v in ball.vertices:
            if v == t.root:
                continue
            q = m.glue(v, PeriodicEnd(Word(), Word.parse("a")))
            first = path_from_root(parent, v)[1]
            trace = t.edge_classes(t.root, first)[0]
            assert m.in_neighborhood(q, W) is prefixes_contain(prefixes, spec, trace, d + 8)


def test_membership_right_copy_outside(model):
    m = model("ex73_i")
    left, right = base_edge(m)
    p = m.glue(left, PeriodicEnd(Word(), Word.parse("a")))
    spec = m.vspec(left)
    W = NeighborhoodSpec(p, ((left, cylinders_of(spec, p.point, 2)),))
    q = m.glue(right, PeriodicEnd(Word(), Word.parse("b")))
    assert m.in_neighborhood(q, W) is False
    assert m.in_neighborhood(p, W) is True


def test_membership_tree_end_through_selected_branch(model):
    m = model("ex73_i")
    rng = random.Random(16)
    for _ in range(20):
        eta = m.tree_end(random_loxodromic(m, rng))
        if not isinstance(eta, TreeEnd):
            continue
        first = m.ray(eta, 1)[1]
        trace = m.tree.edge_classes(m.tree.root, first)[0]
        spec = m.vspec(m.tree.root)
        p = m.glue(m.tree.root, PeriodicEnd(end_directions(spec, trace)[0].letters(4), Word.parse("a")))
        W = NeighborhoodSpec(p, ((m.tree.root, cylinders_of(spec, trace, 2).meet(OpenSet.full())),))
        assert m.in_neighborhood(eta, W) is True
        assert m.clause(eta, W) == "A"


def test_center_always_inside(model):
    m = model("ex74")
    rng = random.Random(17)
    for p in sample_points(m, rng, 40):
        for n in (1, 3, 5):
            assert m.in_neighborhood(p, m.basic_neighborhood(p, n)) is True


# -- neighbourhood constructions

def _overlap(m, W1, W2, pts):
    return [q for q in pts if m.in_neighborhood(q, W1) is True and m.in_neighborhood(q, W2) is True]


@pytest.mark.parametrize("name", ["ex73_i", "ex74"])
def test_separate_disjoint_on_samples(model, name):
    m = model(name)
    rng = random.Random(18)
    pts = sample_points(m, rng, 60)
    probes = sample_points(m, rng, 60)
    done = 0
    for p, q in zip(pts, pts[1:]):
        if p == q:
            continue
        Wp, Wq = m.separate(p, q)
        assert m.in_neighborhood(p, Wp) is True and m.in_neighborhood(q, Wq) is True
        near = points_near(m, p, rng, 5) + points_near(m, q, rng, 5) if not isinstance(p, TreeEnd) and not isinstance(q, TreeEnd) else []
        assert not _overlap(m, Wp, Wq, probes + near)
        done += 1
    assert done >= 50


def test_separate_two_points_one_vertex(model):
    m = model("ex73_i")
    r = m.tree.root
    p = m.glue(r, PeriodicEnd(Word(), Word.parse("a")))
    q = m.glue(r, PeriodicEnd(Word(), Word.parse("b")))
    Wp, Wq = m.separate(p, q)
    assert Wp.support_map()[r].disjoint(Wq.support_map()[r])


def test_avoid_edge_excludes_edge_class(model):
    m = model("ex74")
    rng = random.Random(19)
    ball = tree_ball(m.tree, radius=2)
    for p in sample_points(m, rng, 30):
        for _ in range(3):
            u, w = rng.choice(ball.edges())
            y = m.edge_point(u, w)
            if y == p:
                continue
            W = m.avoid_edge(p, u, w)
            assert m.in_neighborhood(p, W) is True
            assert m.in_neighborhood(y, W) is False


def test_avoid_edge_outside_ex74_domain(model):
    m = model("ex74")
    left, right = base_edge(m)
    x = m.edge_point(left, right)
    dv = m.domain(x, 3)
    ball = tree_ball(m.tree, radius=2)
    outside = [(u, w) for u, w in ball.edges() if not (u in dv and w in dv)]
    for u, w in outside[:20]:
        W = m.avoid_edge(x, u, w)
        assert m.in_neighborhood(m.edge_point(u, w), W) is False
        assert m.in_neighborhood(x, W) is True


def test_filtration_stays_inside(model):
    m = model("ex73_i")
    rng = random.Random(20)
    checked = 0
    for p in sample_points(m, rng, 30):
        W = m.basic_neighborhood(p, 2)
        assert m.filtration(W, p) == W
        cands = points_near(m, p, rng, 10, depth=3) if not (isinstance(p, TreeEnd) and not p.exact) else []
        for q in cands:
            if m.in_neighborhood(q, W) is not True:
                continue
            W2 = m.filtration(W, q)
            assert m.in_neighborhood(q, W2) is True
            for z in points_near(m, q, rng, 10, depth=4) + sample_points(m, rng, 10):
                if m.in_neighborhood(z, W2) is True:
                    assert m.in_neighborhood(z, W) is not False
            checked += 1
    assert checked > 20


def test_basis_property(model):
    m = model("ex74")
    rng = random.Random(21)
    for p in sample_points(m, rng, 20):
        W1 = m.basic_neighborhood(p, 2)
        W2 = m.basic_neighborhood(p, 3, support_radius=0)
        W = m.meet(W1, W2)
        for z in sample_points(m, rng, 20) + (points_near(m, p, rng, 10) if not isinstance(p, TreeEnd) else []):
            if m.in_neighborhood(z, W) is True:
                assert m.in_neighborhood(z, W1) is not False
                assert m.in_neighborhood(z, W2) is not False


def test_closure_gap_tree_end_adds_two(model):
    m = model("ex73_i")
    rng = random.Random(22)
    for _ in range(10):
        eta = m.tree_end(random_loxodromic(m, rng))
        if not isinstance(eta, TreeEnd):
            continue
        W = NeighborhoodSpec(eta, m=3)
        Wn = m.closure_gap(W)
        assert Wn.m is not None and Wn.m <= 5


def test_closure_gap_edge_class_ex73_ii(model):
    m = model("ex73_ii")
    rng = random.Random(23)
    x = m.edge_point(*base_edge(m))
    W = m.basic_neighborhood(x, 3)
    Wn = m.closure_gap(W)
    for v, u in Wn.support_map().items():
        assert u.refines(W.support_map()[v])
    for z in points_near(m, x, rng, 40):
        if m.in_neighborhood(z, Wn) is True:
            assert m.in_neighborhood(z, W) is True


def test_clauses_are_exclusive(model):
    m = model("ex74")
    rng = random.Random(24)
    for p in sample_points(m, rng, 15):
        W = m.basic_neighborhood(p, 2)
        for q in sample_points(m, rng, 15):
            c = m.clause(q, W)
            assert c in (None, "A", "B", "C")
            if c == "A":
                assert isinstance(q, TreeEnd)
            if c == "C":
                assert not isinstance(q, TreeEnd)


# -- convergence

def test_constant_sequence_converges(model):
    m = model("ex74")
    rng = random.Random(25)
    for p in sample_points(m, rng, 10):
        assert m.converges([p] * 8, p).holds is True


def test_loxodromic_orbit_converges_to_attracting_end(model):
    m = model("ex73_i")
    rng = random.Random(26)
    g = random_loxodromic(m, rng)
    eta = m.tree_end(g)
    x0 = m.glue(m.tree.root, PeriodicEnd(Word(), Word.parse("aB")))
    seq = [act(m, m._power(g, n), x0) for n in range(1, 13)]
    rep = m.converges(seq, eta)
    assert rep.holds is True
    # oracle: the anchors of g^n x0 follow the axis ray
    for n, q in enumerate(seq[4:], start=5):
        a, _ = m.anchor(q)
        ray = m.ray(eta, a.depth)
        assert m.tree.distance(a, ray[-1]) <= 2 * m.translation_length(g) + m.tree.distance(m.tree.root, m.tree.act(g, m.tree.root))


def test_domain_march_converges_to_edge_class(model):
    m = model("ex73_ii")
    x = m.edge_point(*base_edge(m))
    dv = m.domain(x, 16)
    # walk out along one side of the line, past the accumulation resolution
    side = [dv.base]
    while len(side) < 16:
        nxt = [w for w in dv.adjacency[side[-1]] if w not in side]
        side.append(nxt[0])
    seq = [m.glue(v, PeriodicEnd(Word(), Word.parse("a"))) for v in side]
    assert m.converges(seq, x).holds is True
    _, lim = m.accumulation_point(seq)
    assert lim == x


def test_accumulation_in_one_vertex(model):
    m = model("ex73_i")
    r = m.tree.root
    seq = [m.glue(r, PeriodicEnd(Word.parse("a") ** n, Word.parse("b"))) for n in range(1, 12)]
    idx, lim = m.accumulation_point(seq)
    assert isinstance(lim, VertexPoint) and lim.vertex == r
    assert str(m.anchor(lim)[1].letters(4) if not isinstance(lim.point, TruncatedEnd) else lim.point.prefix).startswith("aaaa")
    assert m.converges([seq[i] for i in idx], lim, levels=(1, 2, 3)).holds is not False


def test_accumulation_of_distinct_edges(model):
    m = model("ex73_i")
    t = m.tree
    r = t.root
    seq = [m.edge_point(r, t.child(r, Word.parse("a") ** n, E)) for n in range(1, 12)]
    assert len(set(seq)) == len(seq)
    idx, lim = m.accumulation_point(seq)
    assert isinstance(lim, VertexPoint) and lim.vertex == r
    pre = lim.point.prefix if isinstance(lim.point, TruncatedEnd) else lim.point.letters(6)
    assert str(pre).startswith("aaaa")


def test_accumulation_escaping_ray(model):
    m = model("ex73_i")
    rng = random.Random(27)
    g = random_loxodromic(m, rng)
    eta = m.tree_end(g)
    seq = [m.glue(v, PeriodicEnd(Word(), Word.parse("a"))) for v in m.ray(eta, 16)[1:]]
    idx, lim = m.accumulation_point(seq)
    assert isinstance(lim, TreeEnd)
    assert m.ray(lim, 12) == m.ray(eta, 12)


def test_parse_point_roundtrip(model):
    m = model("ex74")
    rng = random.Random(28)
    for p in sample_points(m, rng, 20):
        if isinstance(p, TreeEnd):
            continue
        assert parse_point(m, str(p)) == p
