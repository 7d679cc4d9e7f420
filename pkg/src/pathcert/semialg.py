"""Semialgebraic sets, unions of them, and problem instances.

Every basic set carries a finite bounding box.  The box is materialised as the
inequalities ``(x_i - lo_i)(hi_i - x_i) >= 0`` whenever a Putinar
representation is built, which keeps every description Archimedean.  Point sets
are basic sets whose box is degenerate and whose equalities pin each coordinate.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

from .poly import Polynomial, x_space

MAX_DRAWS_PER_POINT = 10**6


class ProblemError(ValueError):
    """Raised for malformed or inconsistent problem documents."""


class SamplingError(RuntimeError):
    """Rejection sampling could not find points in a set."""


class Control(str, Enum):
    BOX = "box"
    BALL = "ball"


@dataclass(frozen=True)
class BasicSet:
    """``{x : g(x) >= 0 for g in ineqs, h(x) = 0 for h in eqs} ∩ box``."""

    n: int
    ineqs: tuple[Polynomial, ...]
    eqs: tuple[Polynomial, ...]
    box: tuple[tuple[float, float], ...]

    def __post_init__(self):
        space = x_space(self.n)
        for p in self.ineqs + self.eqs:
            if p.space != space:
                raise ProblemError(f"constraint space {p.space} differs from {space}")
        if len(self.box) != self.n:
            raise ProblemError(f"box has {len(self.box)} intervals, expected {self.n}")
        for lo, hi in self.box:
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ProblemError("bounding box must be finite")
            if lo > hi:
                raise ProblemError(f"empty box interval [{lo}, {hi}]")

    @property
    def space(self):
        return x_space(self.n)

    @classmethod
    def point(cls, c: Sequence[float]) -> "BasicSet":
        n = len(c)
        space = x_space(n)
        eqs = tuple(Polynomial.variable(f"x{i + 1}", space) - float(ci) for i, ci in enumerate(c))
        return cls(n, (), eqs, tuple((float(ci), float(ci)) for ci in c))

    @classmethod
    def box_set(cls, box: Sequence[Sequence[float]], ineqs=(), eqs=()) -> "BasicSet":
        box = tuple((float(lo), float(hi)) for lo, hi in box)
        return cls(len(box), tuple(ineqs), tuple(eqs), box)

    def box_constraints(self) -> list[Polynomial]:
        """Box intervals as quadratic inequalities."""
        space = self.space
        out = []
        for i, (lo, hi) in enumerate(self.box):
            xi = Polynomial.variable(f"x{i + 1}", space)
            out.append((xi - lo) * (hi - xi))
        return out

    def pinned_point(self) -> np.ndarray | None:
        if all(lo == hi for lo, hi in self.box):
            return np.array([lo for lo, _ in self.box])
        return None

    def member_mask(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.n:
            raise ProblemError(f"points have dimension {pts.shape[1]}, set has {self.n}")
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        mask = np.all((pts >= lo - tol) & (pts <= hi + tol), axis=1)
        for g in self.ineqs:
            mask &= g.evaluate_many(pts) >= -tol
        for h in self.eqs:
            mask &= np.abs(h.evaluate_many(pts)) <= tol
        return mask

    def to_json(self) -> dict:
        return {
            "ineqs": [g.to_json() for g in self.ineqs],
            "eqs": [h.to_json() for h in self.eqs],
            "box": [[lo, hi] for lo, hi in self.box],
        }


@dataclass(frozen=True)
class SetUnion:
    components: tuple[BasicSet, ...]

    def __post_init__(self):
        if not self.components:
            raise ProblemError("a set union needs at least one component")
        dims = {c.n for c in self.components}
        if len(dims) != 1:
            raise ProblemError(f"components disagree on dimension: {sorted(dims)}")

    @property
    def n(self) -> int:
        return self.components[0].n

    def bounding_box(self) -> tuple[tuple[float, float], ...]:
        los = np.min([[b[0] for b in c.box] for c in self.components], axis=0)
        his = np.max([[b[1] for b in c.box] for c in self.components], axis=0)
        return tuple((float(a), float(b)) for a, b in zip(los, his))

    def member_mask(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mask = np.zeros(pts.shape[0], dtype=bool)
        for c in self.components:
            mask |= c.member_mask(pts, tol)
        return mask

    def to_json(self) -> dict:
        return {"components": [c.to_json() for c in self.components]}


@dataclass(frozen=True)
class ProblemInstance:
    n: int
    X: SetUnion
    X0: SetUnion
    X1: SetUnion
    T: float
    control: Control = Control.BOX
    name: str = "problem"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise ProblemError(f"time horizon must be positive and finite, got {self.T}")
        for label, s in (("X", self.X), ("X0", self.X0), ("X1", self.X1)):
            if s.n != self.n:
                raise ProblemError(f"{label} has dimension {s.n}, problem has {self.n}")
        outer = self.X.bounding_box()
        for label, s in (("X0", self.X0), ("X1", self.X1)):
            for c in s.components:
                for (lo, hi), (olo, ohi) in zip(c.box, outer):
                    if lo < olo - 1e-12 or hi > ohi + 1e-12:
                        raise ProblemError(f"{label} component leaves the bounding box of X")

    def to_json(self) -> dict:
        doc = {
            "name": self.name,
            "n": self.n,
            "T": self.T,
            "control": self.control.value,
            "X": self.X.to_json(),
            "X0": self.X0.to_json(),
            "X1": self.X1.to_json(),
        }
        if self.meta:
            doc["meta"] = self.meta
        return doc

    def canonical_text(self) -> str:
        doc = self.to_json()
        doc.pop("meta", None)
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


# parsing


def _check_number(x: Any, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ProblemError(f"{what} must be a number, got {x!r}")
    if not math.isfinite(x):
        raise ProblemError(f"{what} must be finite, got {x!r}")
    return float(x)


def _parse_poly(doc: Any, n: int, what: str) -> Polynomial:
    if not isinstance(doc, dict) or not isinstance(doc.get("terms"), list):
        raise ProblemError(f"{what}: polynomial must be an object with a 'terms' list")
    terms = {}
    for term in doc["terms"]:
        if not isinstance(term, dict) or "exps" not in term or "coef" not in term:
            raise ProblemError(f"{what}: each term needs 'exps' and 'coef'")
        exps = term["exps"]
        if not isinstance(exps, list) or len(exps) != n:
            raise ProblemError(f"{what}: exponent list {exps!r} must have length {n}")
        if any(isinstance(e, bool) or not isinstance(e, int) or e < 0 for e in exps):
            raise ProblemError(f"{what}: exponents must be nonnegative integers")
        coef = _check_number(term["coef"], f"{what} coefficient")
        terms[tuple(exps)] = terms.get(tuple(exps), 0.0) + coef
    return Polynomial(x_space(n), terms)


def _parse_set(doc: Any, n: int, what: str) -> SetUnion:
    if not isinstance(doc, dict) or not isinstance(doc.get("components"), list):
        raise ProblemError(f"{what}: expected an object with a 'components' list")
    comps = []
    for k, c in enumerate(doc["components"]):
        where = f"{what}.components[{k}]"
        if not isinstance(c, dict) or "box" not in c:
            raise ProblemError(f"{where}: missing 'box'")
        box = c["box"]
        if not isinstance(box, list) or len(box) != n:
            raise ProblemError(f"{where}: box must list {n} intervals")
        parsed_box = []
        for iv in box:
            if not isinstance(iv, list) or len(iv) != 2:
                raise ProblemError(f"{where}: box intervals must be [lo, hi]")
            parsed_box.append((_check_number(iv[0], f"{where} box"), _check_number(iv[1], f"{where} box")))
        ineqs = tuple(_parse_poly(p, n, f"{where}.ineqs") for p in c.get("ineqs", []))
        eqs = tuple(_parse_poly(p, n, f"{where}.eqs") for p in c.get("eqs", []))
        comps.append(BasicSet(n, ineqs, eqs, tuple(parsed_box)))
    return SetUnion(tuple(comps))


def parse_problem(text: str | dict) -> ProblemInstance:
    """Parse and validate a JSON problem document."""
    if isinstance(text, str):
        try:
            doc = json.loads(text, parse_constant=lambda c: _reject_constant(c))
        except json.JSONDecodeError as exc:
            raise ProblemError(f"invalid JSON: {exc}") from exc
    else:
        doc = text
    if not isinstance(doc, dict):
        raise ProblemError("problem document must be a JSON object")
    for key in ("n", "T", "X", "X0", "X1"):
        if key not in doc:
            raise ProblemError(f"missing field {key!r}")
    n = doc["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ProblemError(f"n must be a positive integer, got {n!r}")
    T = _check_number(doc["T"], "T")
    try:
        control = Control(doc.get("control", "box"))
    except ValueError as exc:
        raise ProblemError(f"control must be 'box' or 'ball', got {doc.get('control')!r}") from exc
    name = doc.get("name", "problem")
    if not isinstance(name, str):
        raise ProblemError("name must be a string")
    meta = doc.get("meta", {})
    if not isinstance(meta, dict):
        raise ProblemError("meta must be an object")
    return ProblemInstance(
        n=n,
        X=_parse_set(doc["X"], n, "X"),
        X0=_parse_set(doc["X0"], n, "X0"),
        X1=_parse_set(doc["X1"], n, "X1"),
        T=T,
        control=control,
        name=name,
        meta=meta,
    )


def _reject_constant(c: str):
    raise ProblemError(f"non-finite number {c} is not allowed")


def load_problem(path) -> ProblemInstance:
    with open(path) as fh:
        return parse_problem(fh.read())


def dump_problem(problem: ProblemInstance) -> str:
    return json.dumps(problem.to_json(), indent=2)


# membership and sampling


def membership(s: SetUnion | BasicSet, point: Sequence[float], tol: float = 0.0) -> bool:
    point = np.asarray(point, dtype=float)
    if point.ndim != 1 or point.shape[0] != s.n:
        raise ProblemError(f"point has dimension {point.shape}, set has {s.n}")
    return bool(s.member_mask(point[None, :], tol)[0])


def _sample_component(c: BasicSet, count: int, rng: np.random.Generator) -> np.ndarray:
    if count == 0:
        return np.zeros((0, c.n))
    pinned = c.pinned_point()
    if pinned is not None:
        if not c.member_mask(pinned[None, :], 1e-9)[0]:
            raise SamplingError(f"pinned point {pinned} violates its own constraints")
        return np.tile(pinned, (count, 1))
    lo = np.array([b[0] for b in c.box])
    hi = np.array([b[1] for b in c.box])
    out = []
    got = 0
    draws = 0
    budget = MAX_DRAWS_PER_POINT * count
    chunk = max(1024, 4 * count)
    while got < count:
        if draws >= budget:
            raise SamplingError(
                f"rejection budget exhausted after {draws} draws ({got}/{count} accepted); "
                "set may have measure zero or be empty"
            )
        pts = rng.uniform(lo, hi, size=(chunk, c.n))
        draws += chunk
        # accept at tol=0 so every point passes membership at any positive tolerance
        keep = pts[c.member_mask(pts, 0.0)]
        out.append(keep[: count - got])
        got += min(len(keep), count - got)
        if got == 0 and draws >= 10 * chunk:
            chunk = min(chunk * 8, 10**6)
    return np.concatenate(out, axis=0)


def sample_set(s: SetUnion | BasicSet, count: int, seed: int = 0) -> np.ndarray:
    """Seeded rejection sampling; the count is split evenly among components."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    comps = s.components if isinstance(s, SetUnion) else (s,)
    rng = np.random.default_rng(seed)
    k = len(comps)
    shares = [count // k + (1 if j < count % k else 0) for j in range(k)]
    parts = [_sample_component(c, m, rng) for c, m in zip(comps, shares)]
    return np.concatenate(parts, axis=0) if parts else np.zeros((0, s.n))
