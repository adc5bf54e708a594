"""DOT and CSV writers and reproducible run manifests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
from importlib import metadata
from pathlib import Path

from ..tree import DomainView, TreeBall, to_dot
from .scenario import Scenario


def csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([str(x) for x in row])
    return buf.getvalue()


def ball_dot(ball: TreeBall, name: str = "T") -> str:
    return to_dot(ball.vertices, ball.adjacency, name, highlight=[ball.center])


def ball_csv(ball: TreeBall) -> str:
    rows = [(v.label, v.orbit, v.depth, len(ball.adjacency[v])) for v in ball.vertices]
    return csv_text(["vertex", "orbit", "depth", "degree_in_ball"], rows)


def domain_dot(view: DomainView, name: str = "D") -> str:
    return to_dot(view.vertices, view.adjacency, name, highlight=[view.base])


def domain_csv(view: DomainView) -> str:
    rows = [(v.label, view.classes[v], view.depth_in_domain[v]) for v in view.vertices]
    return csv_text(["vertex", "trace", "depth_in_domain"], rows)


def _version(dist: str) -> str:
    try:
        return metadata.version(dist)
    except metadata.PackageNotFoundError:
        return "unknown"


def run_manifest(scenario: Scenario, params: dict, outputs: dict[str, str]) -> dict:
    """Everything needed to reproduce a run; no clocks, no hostnames."""
    from .. import __version__
    return {
        "scenario": scenario.name,
        "scenario_sha256": scenario.sha256,
        "params": params,
        "versions": {
            "bowditch": __version__,
            "python": platform.python_version(),
            "numpy": _version("numpy"),
            "scipy": _version("scipy"),
        },
        "outputs": {k: hashlib.sha256(v.encode()).hexdigest() for k, v in sorted(outputs.items())},
    }


def write_run(out_dir: str | Path, outputs: dict[str, str], manifest: dict) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(outputs.items()):
        (out / name).write_text(text)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out
