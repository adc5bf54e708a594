"""Experiment drivers shared by the CLI and the acceptance suite.

Each driver takes an explicit ``random.Random`` and returns a summary
dict plus CSV rows, so runs are reproducible from (scenario, seed).
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..boundary import (
    BoundaryModel,
    EdgeParabolic,
    TreeEnd,
    points_near,
    random_loop,
    random_loxodromic,
    sample_points,
)
from ..dynamics import (
    SubgroupHandle,
    bounded_parabolic_witness,
    certify_conical,
    conical_witness,
    dyn_qc_probe,
    limit_set,
    north_south_probe,
    stabilizer_probe,
)
from ..freegrp import Word
from .components import default_removed


@dataclass
class ProbeResult:
    name: str
    summary: dict
    header: list[str]
    rows: list[tuple] = field(default_factory=list)


def north_south_run(model: BoundaryModel, rng: random.Random, count: int = 20, depth: int = 4,
                    powers: int = 16, sample: int = 40) -> ProbeResult:
    """Capture positions for powers of random loxodromic elements."""
    rows = []
    for k in range(count):
        g = random_loxodromic(model, rng)
        seq = [model._power(g, n) for n in range(1, powers + 1)]
        pts = sample_points(model, rng, sample)
        rep = north_south_probe(model, seq, pts, depths=(depth,), attractor=model.tree_end(g),
                                repeller=model.tree_end(model.pc.invert(g)))
        rows.append((k, str(g), model.translation_length(g), rep.sample_size, rep.capture[depth], rep.certified))
    n0 = [r[4] for r in rows]
    summary = {"elements": count, "depth": depth, "certified": sum(r[5] for r in rows),
               "max_n0": max((x for x in n0 if x is not None), default=None)}
    return ProbeResult("north_south", summary,
                       ["k", "element", "translation_length", "sample", "n0", "certified"], rows)


def dyn_qc_run(model: BoundaryModel, h: str = "a", cosets: int = 50, depth: int = 5,
               vertex: str | None = None, coset_letter: str = "b") -> ProbeResult:
    v = model.spec.base if vertex is None else vertex
    g = Word.parse(coset_letter)
    reps = [g ** n for n in range(1, cosets + 1)]
    rep = dyn_qc_probe(model.spec.vertex(v), Word.parse(h), reps, depth)
    rows = [(str(w), d) for w, d in zip(reps, rep.diameters)]
    summary = {"h": h, "cosets": cosets, "depth": depth, "threshold": rep.threshold, "exceptions": rep.exceptions}
    return ProbeResult("dyn_qc", summary, ["coset", "diameter"], rows)


def conical_run(model: BoundaryModel, rng: random.Random, count: int = 10, depth: int = 2,
                sample: int = 30) -> ProbeResult:
    rows = []
    tries = 0
    while len(rows) < count:
        tries += 1
        if tries > 50 * count:
            raise RuntimeError("too few exact tree ends found")
        eta = model.tree_end(random_loxodromic(model, rng))
        if not isinstance(eta, TreeEnd):
            continue  # folded into an edge class
        w = certify_conical(model, conical_witness(model, eta), eta, sample_points(model, rng, sample), depth)
        rows.append((len(rows), str(eta), w.capture, w.certified))
    summary = {"ends": count, "certified": sum(r[3] for r in rows), "depth": depth}
    return ProbeResult("conical", summary, ["k", "end", "capture", "certified"], rows)


def bounded_parabolic_run(model: BoundaryModel, rng: random.Random, depth: int = 4, sample: int = 300,
                          x: EdgeParabolic | None = None) -> ProbeResult:
    """Half the sample is spread over the boundary, half is concentrated near the class; none equals it."""
    x = default_removed(model) if x is None else x
    # the cover is of the complement of x, so copies of x are redrawn
    far = [z for z in sample_points(model, rng, sample - sample // 2) if z != x]
    near = [z for z in points_near(model, x, rng, sample // 2) if z != x]
    while len(far) < sample - sample // 2:
        far += [z for z in sample_points(model, rng, 1) if z != x]
    while len(near) < sample // 2:
        near += [z for z in points_near(model, x, rng, 1) if z != x]
    pts = far + near
    rep = bounded_parabolic_witness(model, x, depth, pts)
    rows = [(str(z),) for z in rep.uncovered]
    summary = {"point": str(x), "depth": depth, "sample": rep.sample_size, "covered": rep.covered,
               "undecided": rep.undecided, "uncovered": len(rep.uncovered), "certified": rep.certified,
               "types": len(rep.compact)}
    return ProbeResult("bounded_parabolic", summary, ["uncovered_point"], rows)


def _direct_trace_test(model: BoundaryModel, p) -> bool:
    """Membership in the limit set of the base vertex group, read off the trace at the base vertex."""
    if isinstance(p, TreeEnd):
        return False
    return model.trace_at(p, model.tree.root) is not None


def limit_set_run(model: BoundaryModel, rng: random.Random, samples: int = 200,
                  candidates: int = 20) -> ProbeResult:
    lam = limit_set(model, SubgroupHandle.subgraph([model.spec.base]))
    pts = lam.sample(rng, samples // 2) + sample_points(model, rng, samples - samples // 2)
    rows = []
    for p in pts:
        rows.append((str(p), lam.contains(p), _direct_trace_test(model, p)))
    agree = sum(1 for r in rows if r[1] == r[2])
    cands = []
    while len(cands) < candidates:
        g = random_loop(model, rng, rng.randint(1, 2))
        if not lam.contains_element(g):
            cands.append(g)
    verdicts = stabilizer_probe(model, lam, cands, lam.sample(rng, 30))
    summary = {"samples": len(rows), "agree": agree, "inside": sum(1 for r in rows if r[2]),
               "candidates": candidates, "moved": sum(1 for v in verdicts if v.witness is not None)}
    return ProbeResult("limit_set", summary, ["point", "limit_set", "trace_test"], rows)

