"""Command line entry point.

Exit codes: 0 when declared expectations are met (or none are declared),
2 on an expectation mismatch, 1 on an error.
"""
from __future__ import annotations

import argparse
import json
import random
import sys

from ..boundary import BoundaryModel, parse_point
from ..gog import validate
from ..tree import BassSerreTree, BudgetExceeded, tree_ball
from . import experiments
from .components import default_removed, expectation_met, run_components
from .export import ball_csv, ball_dot, csv_text, domain_csv, domain_dot, run_manifest, write_run
from .homeo import build_homeo
from .scenario import load_scenario

PROBES = ("north-south", "dyn-qc", "conical", "bounded-parabolic")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bowditch", description="Finite-resolution boundary computations for splittings of free groups over cyclic subgroups.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--scenario", required=True, help="built-in name or path to a scenario JSON file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--budget", type=int, default=None)
        sp.add_argument("--out", default=None, help="run directory; print to stdout when omitted")
        sp.add_argument("--format", choices=("csv", "dot"), default="csv")
        return sp

    add("validate", "check a scenario and report edge statuses")
    add("parabolize", "print the parabolized scenario")
    sp = add("tree", "enumerate a ball of the tree")
    sp.add_argument("--radius", type=int, default=None)
    sp = add("domain", "enumerate the domain of an edge class")
    sp.add_argument("--radius", type=int, default=None)
    sp.add_argument("--point", default=None, help="point text such as 'edge[1] e.P0'; default: first edge class")
    sp = add("components", "count components with an edge class removed")
    sp.add_argument("--depth", type=int, action="append", default=None)
    sp.add_argument("--radius", type=int, default=None, help="hub radius; default depth - 2")
    sp = add("dynamics", "run a dynamics probe")
    sp.add_argument("--probe", choices=PROBES, required=True)
    sp.add_argument("--depth", type=int, default=None)
    sp = add("limitset", "limit set of the base vertex group and stabilizer probe")
    sp.add_argument("--samples", type=int, default=200)
    sp = add("homeo", "build the boundary map to another scenario, or report the refusal")
    sp.add_argument("--other", required=True)
    sp.add_argument("--map", action="append", default=[],
                    help="vertex substitution such as 'R:a=b,b=A' (repeatable)")
    sp.add_argument("--radius", type=int, default=2)
    sp = add("export", "write tree, domain and component artifacts with a manifest")
    sp.add_argument("--radius", type=int, default=None)
    sp.add_argument("--depth", type=int, action="append", default=None)
    return p


def _emit(args, scenario, name: str, text: str, params: dict) -> None:
    if args.out:
        write_run(args.out, {name: text}, run_manifest(scenario, params, {name: text}))
    else:
        sys.stdout.write(text)


def _parse_maps(items: list[str]) -> dict:
    out = {}
    for item in items:
        v, _, body = item.partition(":")
        subs = dict(pair.split("=", 1) for pair in body.split(",") if pair)
        out[v] = subs
    return out


def _components_text(report) -> str:
    return csv_text(["depth", "radius", "count", "hubs", "vertices", "nodes"], report.rows())


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except (ValueError, FileNotFoundError, BudgetExceeded, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _run(args) -> int:
    sc = load_scenario(args.scenario)
    seed = sc.seed if args.seed is None else args.seed
    budget = sc.budget if args.budget is None else args.budget
    params = {"command": args.command, "seed": seed, "budget": budget}
    cmd = args.command
    if cmd == "validate":
        rep = validate(sc.raw)
        lines = [f"ok: {rep.ok}"] + [f"problem: {p}" for p in rep.problems]
        lines += [f"edge {e} end {side}: {st}" for (e, side), st in sorted(rep.statuses.items())]
        print("\n".join(lines))
        return 0 if rep.ok else 1
    if cmd == "parabolize":
        _emit(args, sc, "parabolized.json", sc.spec.to_json() + "\n", params)
        return 0
    model = BoundaryModel(sc.spec)
    if cmd == "tree":
        radius = sc.radius if args.radius is None else args.radius
        params["radius"] = radius
        ball = tree_ball(model.tree, radius=radius, budget=budget)
        text = ball_dot(ball) if args.format == "dot" else ball_csv(ball)
        _emit(args, sc, f"tree.{args.format}", text, params)
        return 0
    if cmd == "domain":
        radius = sc.radius if args.radius is None else args.radius
        x = default_removed(model) if args.point is None else parse_point(model, args.point)
        if x is None:
            raise ValueError("scenario has no edge classes")
        params.update(radius=radius, point=str(x))
        view = model.domain(x, radius)
        text = domain_dot(view) if args.format == "dot" else domain_csv(view)
        _emit(args, sc, f"domain.{args.format}", text, params)
        return 0
    if cmd == "components":
        depths = args.depth or sc.depths
        params.update(depths=depths, radius=args.radius)
        rep = run_components(sc, depths, radius=args.radius, budget=budget)
        _emit(args, sc, "components.csv", _components_text(rep), params)
        ok = expectation_met(rep, sc.expect.get("components"))
        print(f"# verdict {rep.verdict}; expectation {'none' if ok is None else ('met' if ok else 'MISSED')}",
              file=sys.stderr)
        return 2 if ok is False else 0
    if cmd == "dynamics":
        rng = random.Random(seed)
        if args.probe == "north-south":
            res = experiments.north_south_run(model, rng, depth=args.depth or 4)
        elif args.probe == "dyn-qc":
            res = experiments.dyn_qc_run(model, depth=args.depth or 5)
        elif args.probe == "conical":
            res = experiments.conical_run(model, rng, depth=args.depth or 2)
        else:
            res = experiments.bounded_parabolic_run(model, rng, depth=args.depth or 4)
        params.update(probe=args.probe, summary=res.summary)
        _emit(args, sc, f"{res.name}.csv", csv_text(res.header, res.rows), params)
        print("# " + json.dumps(res.summary, sort_keys=True), file=sys.stderr)
        return 0
    if cmd == "limitset":
        res = experiments.limit_set_run(model, random.Random(seed), samples=args.samples)
        params["summary"] = res.summary
        _emit(args, sc, "limit_set.csv", csv_text(res.header, res.rows), params)
        print("# " + json.dumps(res.summary, sort_keys=True), file=sys.stderr)
        return 0
    if cmd == "homeo":
        other = load_scenario(args.other)
        maps = _parse_maps(args.map)
        homeos = {v: (v, maps.get(v)) for v in sc.spec.vertex_ids}
        res = build_homeo(sc.spec, other.spec, homeos, radius=args.radius)
        if not res:
            text = f"refused: hypothesis {res.hypothesis}: {res.detail}\n"
        else:
            text = "\n".join(res.rules) + f"\ntable: {len(res.table)} vertices to radius {res.radius}\n"
        params.update(other=other.name, other_sha256=other.sha256, maps=args.map)
        _emit(args, sc, "homeo.txt", text, params)
        return 0
    if cmd == "export":
        radius = sc.radius if args.radius is None else args.radius
        depths = args.depth or sc.depths
        params.update(radius=radius, depths=depths)
        ball = tree_ball(BassSerreTree(sc.spec), radius=radius, budget=budget)
        outputs = {"tree.dot": ball_dot(ball), "tree.csv": ball_csv(ball)}
        x = default_removed(model)
        if x is not None:
            view = model.domain(x, radius)
            outputs["domain.dot"] = domain_dot(view)
            outputs["domain.csv"] = domain_csv(view)
        rep = run_components(sc, depths, budget=budget)
        outputs["components.csv"] = _components_text(rep)
        if args.out:
            write_run(args.out, outputs, run_manifest(sc, params, outputs))
        else:
            for name, text in sorted(outputs.items()):
                sys.stdout.write(f"# {name}\n{text}")
        ok = expectation_met(rep, sc.expect.get("components"))
        return 2 if ok is False else 0
    raise ValueError(f"unknown command {cmd}")


if __name__ == "__main__":
    sys.exit(main())
