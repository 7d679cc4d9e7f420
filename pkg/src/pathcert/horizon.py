"""Upper bounds on the travel time needed inside a connected set."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .semialg import ProblemInstance


class HorizonMethod(str, Enum):
    KURDYKA = "KurdykaDegree"
    BOX_UNION = "BoxUnionDiagonals"
    USER = "UserSupplied"


@dataclass(frozen=True)
class HorizonBound:
    value: float
    method: HorizonMethod
    inputs: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if not (self.value > 0):
            raise ValueError("a horizon bound must be positive")

    def to_json(self) -> dict:
        return {"value": self.value if math.isfinite(self.value) else "inf", "method": self.method.value,
                "inputs": self.inputs, "label": self.label}


def kurdyka_time_bound(n: int, deg: int) -> float:
    """Geodesic-diameter bound for a set cut out by one polynomial of degree ``deg`` in ``n`` variables.

    The constant is the one stated for the lifted variety; it is reported as
    such and not claimed for the original set.
    """
    if n < 2 or deg < 2:
        raise ValueError("the degree bound needs n >= 2 and deg >= 2")
    g = math.gamma
    return 4.0 * g(0.5) * g((n + 2) / 2) / g((n + 1) / 2) * deg * (4 * deg - 5) ** (n - 1)


def box_union_time_bound(boxes: Sequence[Sequence[Sequence[float]]]) -> float:
    """Sum of the diagonals of a connected union of axis-aligned boxes."""
    if len(boxes) == 0:
        raise ValueError("need at least one box")
    total = 0.0
    for box in boxes:
        sq = 0.0
        for lo, hi in box:
            if not lo < hi:
                raise ValueError(f"degenerate box side [{lo}, {hi}]")
            sq += (hi - lo) ** 2
        total += math.sqrt(sq)
    return total


def problem_bounds(problem: ProblemInstance) -> list[HorizonBound]:
    """All bounds that apply to ``problem``, with the user's own T first."""
    out = [HorizonBound(problem.T, HorizonMethod.USER, {"T": problem.T})]
    comps = problem.X.components
    if all(not c.ineqs and not c.eqs for c in comps) and all(lo < hi for c in comps for lo, hi in c.box):
        boxes = [list(c.box) for c in comps]
        out.append(HorizonBound(box_union_time_bound(boxes), HorizonMethod.BOX_UNION, {"boxes": boxes}))
    if problem.n >= 2 and len(comps) == 1 and len(comps[0].ineqs) == 1 and not comps[0].eqs:
        deg = comps[0].ineqs[0].degree()
        if deg >= 2:
            out.append(HorizonBound(kurdyka_time_bound(problem.n, deg), HorizonMethod.KURDYKA,
                                    {"n": problem.n, "deg": deg}, "lifted-variety bound"))
    return out
