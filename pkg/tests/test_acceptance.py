"""Acceptance criteria, each at its stated tolerance and time limit."""
import os
import random
import subprocess
import sys
import time

from bowditch.boundary import TreeEnd, Undecidable, points_near, sample_points
from bowditch.lab import experiments, run_components
from bowditch.tree import tree_ball

DEPTHS = [4, 5, 6]


def _components(scenario, name):
    t0 = time.perf_counter()
    rep = run_components(scenario(name), DEPTHS)
    return rep.by_depth, time.perf_counter() - t0


def test_c1_ex73_i_two_components(scenario, record):
    counts, dt = _components(scenario, "ex73_i")
    ok = all(counts[d] == 2 for d in DEPTHS) and dt < 30
    record(1, "ex73_i gives 2 at depths 4-6", ok, f"counts {counts}, {dt:.1f}s")
    assert ok


def test_c2_ex73_ii_increasing(scenario, record):
    counts, dt = _components(scenario, "ex73_ii")
    vals = [counts[d] for d in DEPTHS]
    ok = all(a < b for a, b in zip(vals, vals[1:])) and dt < 60
    record(2, "ex73_ii strictly increasing", ok, f"counts {counts}, {dt:.1f}s")
    assert ok


def test_c3_ex74_counts(scenario, record):
    c3, dt3 = _components(scenario, "ex74")
    c4, dt4 = _components(scenario, "ex74_index3")
    ok = all(c3[d] == 3 and c4[d] == 4 for d in DEPTHS) and dt3 + dt4 < 60
    record(3, "ex74 gives 3, index-3 variant gives 4", ok, f"{c3} / {c4}, {dt3 + dt4:.1f}s")
    assert ok


def test_c4_punctured_torus(scenario, record):
    counts, dt = _components(scenario, "punctured_torus")
    ok = all(counts[d] == 1 for d in DEPTHS)
    record(4, "punctured torus gives 1", ok, f"counts {counts}, {dt:.1f}s")
    assert ok


def _overlap(m, W1, W2, pts):
    return [q for q in pts if m.in_neighborhood(q, W1) is True and m.in_neighborhood(q, W2) is True]


def _topology(m, rng):
    out = {"pairs": 0, "separated": 0, "overlaps": 0, "triples": 0, "violations": 0,
           "avoid": 0, "avoid_ok": 0, "gap": 0, "gap_ok": 0}
    probes = sample_points(m, rng, 60)
    # separation
    while out["pairs"] < 100:
        p, q = sample_points(m, rng, 2)
        if p == q:
            continue
        out["pairs"] += 1
        try:
            Wp, Wq = m.separate(p, q)
        except Undecidable:
            continue
        if m.in_neighborhood(p, Wp) is True and m.in_neighborhood(q, Wq) is True:
            out["separated"] += 1
        near = [] if isinstance(p, TreeEnd) or isinstance(q, TreeEnd) else \
            points_near(m, p, rng, 4) + points_near(m, q, rng, 4)
        out["overlaps"] += len(_overlap(m, Wp, Wq, probes + near))
    # filtration: W around p, q in W, W2 around q, every z in W2 lies in W
    while out["triples"] < 100:
        p = sample_points(m, rng, 1)[0]
        if isinstance(p, TreeEnd):
            continue
        W = m.basic_neighborhood(p, 2)
        qs = [q for q in points_near(m, p, rng, 6, depth=3) if m.in_neighborhood(q, W) is True]
        if not qs:
            continue
        q = qs[0]
        W2 = m.filtration(W, q)
        for z in points_near(m, q, rng, 8, depth=4) + probes[:8]:
            if m.in_neighborhood(z, W2) is True:
                out["triples"] += 1
                out["violations"] += m.in_neighborhood(z, W) is False
                if out["triples"] >= 100:
                    break
    # avoid_edge
    edges = tree_ball(m.tree, radius=2).edges()
    for p in sample_points(m, rng, 40):
        u, w = rng.choice(edges)
        y = m.edge_point(u, w)
        if y == p:
            continue
        out["avoid"] += 1
        W = m.avoid_edge(p, u, w)
        out["avoid_ok"] += m.in_neighborhood(p, W) is True and m.in_neighborhood(y, W) is False
    # closure gap: (W, z) pairs with z drawn near the center
    while out["gap"] < 50:
        p = sample_points(m, rng, 1)[0]
        if isinstance(p, TreeEnd):
            continue
        W = m.basic_neighborhood(p, 3)
        try:
            Wn = m.closure_gap(W)
        except Undecidable:
            out["gap"] += 1
            continue
        for z in points_near(m, p, rng, 5):
            out["gap"] += 1
            out["gap_ok"] += m.in_neighborhood(z, Wn) is not True or m.in_neighborhood(z, W) is True
    return out


def test_c5_topology(model, record):
    t0 = time.perf_counter()
    tot = {}
    for i, name in enumerate(("ex73_i", "ex74")):
        res = _topology(model(name), random.Random(50 + i))
        for k, v in res.items():
            tot[k] = tot.get(k, 0) + v
    dt = time.perf_counter() - t0
    ok = (tot["separated"] >= 0.99 * tot["pairs"] and tot["pairs"] >= 200 and tot["overlaps"] == 0
          and tot["triples"] >= 200 and tot["violations"] == 0
          and tot["avoid_ok"] == tot["avoid"] > 0
          and tot["gap_ok"] == tot["gap"] >= 100 and dt < 300)
    record(5, "topology suite on ex73_i and ex74", ok, f"{tot}, {dt:.1f}s")
    assert ok


def test_c6_dynamics(model, scenario, record):
    t0 = time.perf_counter()
    m = model("ex73_i")
    seed = scenario("ex73_i").seed
    ns = experiments.north_south_run(m, random.Random(seed), count=20, depth=4).summary
    qc = experiments.dyn_qc_run(m, h="a", cosets=50, depth=5).summary
    con = experiments.conical_run(m, random.Random(seed), count=10).summary
    dt = time.perf_counter() - t0
    ok = (ns["certified"] == 20 and ns["max_n0"] is not None and ns["max_n0"] <= 12
          and qc["exceptions"] <= 3 and con["certified"] == 10 and dt < 300)
    record(6, "north-south, dynamical quasiconvexity, conical", ok,
           f"north-south {ns['certified']}/20 n0<={ns['max_n0']}; dyn_qc exceptions {qc['exceptions']}; "
           f"conical {con['certified']}/10; {dt:.1f}s")
    assert ok


def test_c7_bounded_parabolic(model, scenario, record):
    t0 = time.perf_counter()
    parts = []
    ok = True
    for name in ("ex73_i", "ex74"):
        s = experiments.bounded_parabolic_run(model(name), random.Random(scenario(name).seed), depth=4,
                                              sample=300).summary
        parts.append(f"{name}: covered {s['covered']}/{s['sample']} undecided {s['undecided']} "
                     f"uncovered {s['uncovered']}")
        ok = ok and s["sample"] == 300 and s["uncovered"] == 0 and s["undecided"] <= 3
    dt = time.perf_counter() - t0
    ok = ok and dt < 300
    record(7, "bounded parabolic cover at depth 4", ok, "; ".join(parts) + f"; {dt:.1f}s")
    assert ok


def test_c8_limit_sets(model, scenario, record):
    m = model("ex73_i")
    s = experiments.limit_set_run(m, random.Random(scenario("ex73_i").seed), samples=200, candidates=20).summary
    ok = s["agree"] == s["samples"] == 200 and s["moved"] == 20
    record(8, "vertex group limit set and stabilizer probe", ok,
           f"agree {s['agree']}/200, inside {s['inside']}, moved {s['moved']}/20")
    assert ok


COMMANDS = [
    ["components", "--scenario", "ex74", "--depth", "4", "--depth", "5"],
    ["dynamics", "--scenario", "ex73_i", "--probe", "north-south"],
    ["dynamics", "--scenario", "ex73_i", "--probe", "bounded-parabolic"],
    ["limitset", "--scenario", "ex73_i", "--samples", "60"],
]


def _cli(args, hashseed, out=None):
    env = dict(os.environ, PYTHONHASHSEED=str(hashseed))
    extra = ["--out", str(out)] if out is not None else []
    res = subprocess.run([sys.executable, "-m", "bowditch", *args, *extra], env=env, capture_output=True, check=True)
    return res.stdout + res.stderr


def test_c9_determinism(tmp_path, record):
    same = []
    for args in COMMANDS:
        same.append(_cli(args, 0) == _cli(args, 12345))
    export = ["export", "--scenario", "ex74", "--depth", "4"]
    _cli(export, 1, tmp_path / "a")
    _cli(export, 99, tmp_path / "b")
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    same.append(all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files))
    ok = all(same)
    record(9, "byte-identical re-runs", ok, f"{sum(same)}/{len(same)} runs identical across hash seeds")
    assert ok
