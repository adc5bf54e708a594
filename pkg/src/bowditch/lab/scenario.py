"""Scenario files: a graph of groups plus experiment parameters and expectations."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..gog import GraphOfGroupsSpec, ScenarioError, parabolize, validate

DEFAULT_EXPERIMENT = {"depths": [4, 5, 6], "radius": 2, "seed": 7, "budget": 200_000}


@dataclass
class Scenario:
    name: str
    raw: GraphOfGroupsSpec  # as written
    spec: GraphOfGroupsSpec  # parabolized
    experiment: dict = field(default_factory=dict)
    expect: dict = field(default_factory=dict)
    source: str = ""

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.source.encode()).hexdigest()

    @property
    def depths(self) -> list[int]:
        return list(self.experiment["depths"])

    @property
    def seed(self) -> int:
        return int(self.experiment["seed"])

    @property
    def budget(self) -> int:
        return int(self.experiment["budget"])

    @property
    def radius(self) -> int:
        return int(self.experiment["radius"])


def builtin_names() -> list[str]:
    root = resources.files("bowditch") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def scenario_from_text(text: str, name: str = "") -> Scenario:
    data = json.loads(text)
    raw = GraphOfGroupsSpec.from_dict(data)
    rep = validate(raw)
    if not rep:
        raise ScenarioError("; ".join(rep.problems))
    spec = parabolize(raw)
    experiment = dict(DEFAULT_EXPERIMENT)
    experiment.update(data.get("experiment", {}))
    return Scenario(name or raw.name, raw, spec, experiment, dict(data.get("expect", {})), text)


def load_scenario(name_or_path: str | Path) -> Scenario:
    """Load a built-in scenario by name, or a scenario file by path."""
    path = Path(name_or_path)
    if path.suffix == ".json" or path.exists():
        return scenario_from_text(path.read_text(), path.stem)
    name = str(name_or_path)
    if name not in builtin_names():
        raise FileNotFoundError(f"no scenario {name!r}; built-ins: {', '.join(builtin_names())}")
    text = (resources.files("bowditch") / "scenarios" / f"{name}.json").read_text()
    return scenario_from_text(text, name)
