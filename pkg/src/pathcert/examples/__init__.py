"""Problem documents shipped with the package."""

from importlib import resources

from ..semialg import ProblemInstance, parse_problem


def names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files(__name__).iterdir() if p.name.endswith(".json"))


def path(name: str):
    return resources.files(__name__) / f"{name}.json"


def load(name: str) -> ProblemInstance:
    if name not in names():
        raise KeyError(f"no shipped example {name!r}; available: {', '.join(names())}")
    return parse_problem(path(name).read_text())
