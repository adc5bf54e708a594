import pytest

from bowditch.boundary import BoundaryModel
from bowditch.lab.scenario import load_scenario


@pytest.fixture(scope="session")
def scenario():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = load_scenario(name)
        return cache[name]
    return get


@pytest.fixture(scope="session")
def model(scenario):
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = BoundaryModel(scenario(name).spec)
        return cache[name]
    return get


ACCEPTANCE: list[str] = []


@pytest.fixture
def record():
    def put(n: int, name: str, ok: bool, detail: str):
        ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'} [{n}] {name}: {detail}")
    return put


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
