"""Scenarios, experiment drivers, boundary maps, exporters and the CLI."""
from .components import ComponentReport, count_components, default_removed, run_components
from .homeo import HomeoMapData, HomeoRefusal, build_homeo, check_homeo
from .scenario import Scenario, builtin_names, load_scenario

__all__ = [
    "ComponentReport", "count_components", "default_removed", "run_components",
    "HomeoMapData", "HomeoRefusal", "build_homeo", "check_homeo",
    "Scenario", "builtin_names", "load_scenario",
]
