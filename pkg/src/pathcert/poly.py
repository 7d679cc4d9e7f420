"""Sparse multivariate polynomials over explicitly named variable spaces.

A polynomial is a map from exponent tuples to float coefficients together with
an ordered tuple of variable names.  Spaces are never inferred from position:
``("t", "x1")`` and ``("t", "x1", "u1")`` are different spaces and mixing them
requires an explicit :meth:`Polynomial.embed`.

Monomials are ordered graded-lexicographically: by total degree first, then by
exponent tuple with larger powers of earlier variables first, so the basis of
``(t, x1)`` up to degree 2 reads ``1, t, x1, t^2, t x1, x1^2``.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

import numpy as np

Exps = tuple[int, ...]
Space = tuple[str, ...]


def x_space(n: int) -> Space:
    return tuple(f"x{i + 1}" for i in range(n))


def tx_space(n: int) -> Space:
    return ("t",) + x_space(n)


def txu_space(n: int) -> Space:
    return tx_space(n) + tuple(f"u{i + 1}" for i in range(n))


def grlex_key(exps: Exps) -> tuple:
    return (sum(exps), tuple(-e for e in exps))


class Polynomial:
    """Immutable sparse polynomial.  Zero coefficients are never stored."""

    __slots__ = ("space", "terms")

    def __init__(self, space: Sequence[str], terms: Mapping[Exps, float] | None = None):
        space = tuple(space)
        if len(set(space)) != len(space):
            raise ValueError(f"duplicate variable names in space {space}")
        clean: dict[Exps, float] = {}
        for exps, coef in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != len(space):
                raise ValueError(f"exponent {exps} does not match space {space}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            coef = float(coef)
            if coef != 0.0:
                clean[exps] = clean.get(exps, 0.0) + coef
                if clean[exps] == 0.0:
                    del clean[exps]
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # construction helpers

    @classmethod
    def constant(cls, space: Sequence[str], c: float) -> "Polynomial":
        space = tuple(space)
        return cls(space, {(0,) * len(space): c})

    @classmethod
    def variable(cls, name: str, space: Sequence[str]) -> "Polynomial":
        space = tuple(space)
        if name not in space:
            raise KeyError(f"unknown variable {name!r} for space {space}")
        exps = tuple(1 if s == name else 0 for s in space)
        return cls(space, {exps: 1.0})

    @classmethod
    def zero(cls, space: Sequence[str]) -> "Polynomial":
        return cls(space, {})

    # basic properties

    @property
    def nvars(self) -> int:
        return len(self.space)

    def degree(self) -> int:
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def monomials(self) -> list[Exps]:
        return sorted(self.terms, key=grlex_key)

    def coefficient(self, exps: Exps) -> float:
        return self.terms.get(tuple(exps), 0.0)

    def max_abs_coef(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def depends_on(self, name: str) -> bool:
        k = self.space.index(name)
        return any(e[k] for e in self.terms)

    # arithmetic

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.space != self.space:
                raise ValueError(f"space mismatch: {self.space} vs {other.space}")
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(self.space, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0.0) + c
        return Polynomial(self.space, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.space, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial(self.space, {e: c * float(other) for e, c in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: dict[Exps, float] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0.0) + c1 * c2
        return Polynomial(self.space, terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self * (1.0 / float(other))
        return NotImplemented

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(self.space, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.space == other.space and self.terms == other.terms

    def __hash__(self):
        return hash((self.space, tuple(sorted(self.terms.items()))))

    def allclose(self, other: "Polynomial", atol: float = 1e-12) -> bool:
        return (self - other).max_abs_coef() <= atol

    # calculus and substitution

    def differentiate(self, var: str) -> "Polynomial":
        if var not in self.space:
            raise KeyError(f"unknown variable {var!r} for space {self.space}")
        k = self.space.index(var)
        terms = {}
        for e, c in self.terms.items():
            if e[k] > 0:
                ne = e[:k] + (e[k] - 1,) + e[k + 1:]
                terms[ne] = c * e[k]
        return Polynomial(self.space, terms)

    def substitute(self, var: str, value: float) -> "Polynomial":
        """Fix ``var`` to a number and drop it from the space."""
        k = self.space.index(var)
        space = self.space[:k] + self.space[k + 1:]
        terms: dict[Exps, float] = {}
        for e, c in self.terms.items():
            ne = e[:k] + e[k + 1:]
            terms[ne] = terms.get(ne, 0.0) + c * float(value) ** e[k]
        return Polynomial(space, terms)

    def embed(self, space: Sequence[str]) -> "Polynomial":
        """Re-express in a superset space (variables matched by name)."""
        space = tuple(space)
        if space == self.space:
            return self
        missing = [s for s in self.space if s not in space]
        if missing:
            raise ValueError(f"variables {missing} absent from target space {space}")
        idx = [space.index(s) for s in self.space]
        terms = {}
        for e, c in self.terms.items():
            ne = [0] * len(space)
            for k, p in zip(idx, e):
                ne[k] = p
            terms[tuple(ne)] = c
        return Polynomial(space, terms)

    def restrict(self, space: Sequence[str]) -> "Polynomial":
        """Drop variables that do not occur; errors if a dropped one is used."""
        space = tuple(space)
        for s in self.space:
            if s not in space and self.depends_on(s):
                raise ValueError(f"polynomial depends on {s!r}, cannot drop it")
        idx = [self.space.index(s) for s in space]
        return Polynomial(space, {tuple(e[k] for k in idx): c for e, c in self.terms.items()})

    # evaluation

    def evaluate(self, point: Sequence[float]) -> float:
        if len(point) != len(self.space):
            raise ValueError(f"point has length {len(point)}, space has {len(self.space)}")
        total = 0.0
        for e, c in self.terms.items():
            m = c
            for xi, p in zip(point, e):
                if p:
                    m *= xi ** p
            total += m
        return total

    def __call__(self, *point: float) -> float:
        return self.evaluate(point)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorised evaluation on an ``(N, nvars)`` array."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != len(self.space):
            raise ValueError(f"points have {pts.shape[1]} columns, space has {len(self.space)}")
        if not self.terms:
            return np.zeros(pts.shape[0])
        mons = list(self.terms)
        coefs = np.array([self.terms[m] for m in mons])
        out = np.zeros(pts.shape[0])
        maxdeg = max(max(m) for m in mons)
        powers = [np.ones_like(pts)]
        for _ in range(maxdeg):
            powers.append(powers[-1] * pts)
        for m, c in zip(mons, coefs):
            term = np.full(pts.shape[0], c)
            for k, p in enumerate(m):
                if p:
                    term = term * powers[p][:, k]
            out += term
        return out

    # serialisation

    def to_json(self) -> dict:
        return {"terms": [{"exps": list(e), "coef": self.terms[e]} for e in self.monomials()]}

    @classmethod
    def from_json(cls, doc: Mapping, space: Sequence[str]) -> "Polynomial":
        space = tuple(space)
        terms: dict[Exps, float] = {}
        for term in doc["terms"]:
            exps = tuple(term["exps"])
            coef = term["coef"]
            if not isinstance(coef, (int, float)) or isinstance(coef, bool) or not math.isfinite(coef):
                raise ValueError(f"bad coefficient {coef!r}")
            if len(exps) != len(space):
                raise ValueError(f"exponent {list(exps)} does not match space {space}")
            terms[exps] = terms.get(exps, 0.0) + float(coef)
        return cls(space, terms)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e in self.monomials():
            c = self.terms[e]
            factors = [f"{v}^{p}" if p > 1 else v for v, p in zip(self.space, e) if p]
            parts.append(f"{c:.12g}" + ("".join(" * " + " ".join(factors)) if factors else ""))
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self) -> str:
        return f"Polynomial({self.space}, {str(self)!r})"


def variables(space: Sequence[str]) -> list[Polynomial]:
    return [Polynomial.variable(s, space) for s in space]


def differentiate(p: Polynomial, var: str) -> Polynomial:
    return p.differentiate(var)


def evaluate(p: Polynomial, point: Sequence[float]) -> float:
    return p.evaluate(point)


def lie_derivative(v: Polynomial, f: Sequence[Polynomial]) -> Polynomial:
    """``dv/dt + sum_i f_i dv/dx_i`` for ``v`` over ``(t, x)``, result in f's space."""
    if not f:
        raise ValueError("empty vector field")
    n = len(f)
    space = f[0].space
    if any(fi.space != space for fi in f):
        raise ValueError("vector field components live in different spaces")
    if v.space != tx_space(n):
        raise ValueError(f"v must live in {tx_space(n)}, got {v.space}")
    if any(s not in space for s in v.space):
        raise ValueError(f"vector field space {space} does not contain {v.space}")
    out = v.differentiate("t").embed(space)
    for i, fi in enumerate(f):
        out = out + fi * v.differentiate(f"x{i + 1}").embed(space)
    return out


def single_integrator_field(n: int) -> list[Polynomial]:
    """The field ``xdot = u`` expressed over ``(t, x, u)``."""
    space = txu_space(n)
    return [Polynomial.variable(f"u{i + 1}", space) for i in range(n)]


def gram_size(n_vars: int, d: int) -> int:
    if d < 0:
        raise ValueError("degree must be nonnegative")
    return math.comb(n_vars + d, d)


@lru_cache(maxsize=None)
def monomial_exponents(nvars: int, d: int) -> tuple[Exps, ...]:
    """All exponents of total degree <= d in graded-lex order."""
    out: list[Exps] = []
    for deg in range(d + 1):
        block = []
        for combo in combinations_with_replacement(range(nvars), deg):
            e = [0] * nvars
            for k in combo:
                e[k] += 1
            block.append(tuple(e))
        # combinations_with_replacement is already lex-ordered; keep it explicit
        block.sort(key=grlex_key)
        out.extend(block)
    return tuple(out)


class MonomialBasis:
    """Graded-lex monomial basis of ``space`` up to ``max_degree``."""

    def __init__(self, space: Sequence[str], max_degree: int):
        if max_degree < 0:
            raise ValueError("degree must be nonnegative")
        self.space = tuple(space)
        self.max_degree = max_degree
        self.exponents = monomial_exponents(len(self.space), max_degree)
        self._index = {e: i for i, e in enumerate(self.exponents)}

    def __len__(self) -> int:
        return len(self.exponents)

    def __iter__(self):
        return iter(self.exponents)

    def __getitem__(self, i: int) -> Exps:
        return self.exponents[i]

    def index(self, exps: Exps) -> int:
        return self._index[tuple(exps)]

    def __contains__(self, exps) -> bool:
        return tuple(exps) in self._index


def basis(space: Sequence[str], d: int) -> MonomialBasis:
    return MonomialBasis(space, d)


def add_exps(a: Exps, b: Exps) -> Exps:
    return tuple(x + y for x, y in zip(a, b))


def poly_from_coefficients(space: Sequence[str], coefs: Iterable[tuple[Exps, float]]) -> Polynomial:
    return Polynomial(space, dict(coefs))
