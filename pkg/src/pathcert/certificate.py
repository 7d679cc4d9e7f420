"""Barrier certificates and their JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .poly import Polynomial, tx_space, txu_space, x_space

FORMAT = "pathcert-certificate/1"


@dataclass
class GramTerm:
    """One ``weight * z(x)' Q z(x)`` summand of a Putinar representation."""

    basis: tuple[tuple[int, ...], ...]
    weight: Polynomial
    matrix: np.ndarray

    def polynomial(self) -> Polynomial:
        space = self.weight.space
        terms: dict[tuple[int, ...], float] = {}
        Q = self.matrix
        m = len(self.basis)
        for a in range(m):
            for b in range(m):
                if Q[a, b] == 0.0:
                    continue
                e = tuple(x + y for x, y in zip(self.basis[a], self.basis[b]))
                terms[e] = terms.get(e, 0.0) + Q[a, b]
        return Polynomial(space, terms) * self.weight


@dataclass
class ConstraintCertificate:
    """Putinar multipliers for one WSOS membership.

    ``kind`` is one of ``init``, ``term``, ``lie``, ``lie_box``, ``zeta``.
    """

    kind: str
    component: int
    space: tuple[str, ...]
    grams: list[GramTerm]
    eq_multipliers: list[tuple[Polynomial, Polynomial]]
    channel: int | None = None
    sign: str | None = None
    residual: float | None = None
    min_eig: float | None = None

    def representation(self) -> Polynomial:
        out = Polynomial.zero(self.space)
        for g in self.grams:
            out = out + g.polynomial()
        for mu, h in self.eq_multipliers:
            out = out + mu * h
        return out


@dataclass
class BarrierCertificate:
    v: Polynomial
    n: int
    T: float
    control: str
    builder: str
    order: int
    margin: float
    fingerprint: str
    problem_name: str = ""
    zetas: dict[tuple[int, int], tuple[Polynomial, Polynomial]] = field(default_factory=dict)
    constraints: list[ConstraintCertificate] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def degree(self) -> int:
        return 2 * self.order

    def to_json(self, include_multipliers: bool = True) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "format": FORMAT,
            "problem_fingerprint": self.fingerprint,
            "problem_name": self.problem_name,
            "n": self.n,
            "T": self.T,
            "control": self.control,
            "builder": self.builder,
            "order": self.order,
            "degree": self.degree,
            "margin": self.margin,
            "v": self.v.to_json(),
            "zetas": [
                {"component": j, "channel": i, "plus": zp.to_json(), "minus": zm.to_json()}
                for (j, i), (zp, zm) in sorted(self.zetas.items())
            ],
            "residuals": [
                {"kind": c.kind, "component": c.component, "channel": c.channel, "sign": c.sign,
                 "residual": c.residual, "min_eig": c.min_eig}
                for c in self.constraints
            ],
            "meta": self.meta,
        }
        if include_multipliers:
            doc["constraints"] = [
                {
                    "kind": c.kind,
                    "component": c.component,
                    "channel": c.channel,
                    "sign": c.sign,
                    "space": list(c.space),
                    "grams": [
                        {"basis": [list(e) for e in g.basis], "weight": g.weight.to_json(),
                         "matrix": g.matrix.tolist()}
                        for g in c.grams
                    ],
                    "eq_multipliers": [{"multiplier": mu.to_json(), "h": h.to_json()} for mu, h in c.eq_multipliers],
                }
                for c in self.constraints
            ]
        return doc

    def dumps(self, include_multipliers: bool = True) -> str:
        return json.dumps(self.to_json(include_multipliers), indent=1)

    @classmethod
    def from_json(cls, doc: dict) -> "BarrierCertificate":
        if doc.get("format") != FORMAT:
            raise ValueError(f"unsupported certificate format {doc.get('format')!r}")
        n = int(doc["n"])
        tx = tx_space(n)
        zetas = {
            (int(z["component"]), int(z["channel"])): (Polynomial.from_json(z["plus"], tx),
                                                       Polynomial.from_json(z["minus"], tx))
            for z in doc.get("zetas", [])
        }
        constraints = []
        resid = {(r["kind"], r["component"], r["channel"], r["sign"]): r for r in doc.get("residuals", [])}
        for c in doc.get("constraints", []):
            space = tuple(c["space"])
            grams = [GramTerm(tuple(tuple(e) for e in g["basis"]), Polynomial.from_json(g["weight"], space),
                              np.array(g["matrix"], dtype=float).reshape(len(g["basis"]), len(g["basis"])))
                     for g in c["grams"]]
            eqm = [(Polynomial.from_json(e["multiplier"], space), Polynomial.from_json(e["h"], space))
                   for e in c["eq_multipliers"]]
            r = resid.get((c["kind"], c["component"], c["channel"], c["sign"]), {})
            constraints.append(ConstraintCertificate(c["kind"], int(c["component"]), space, grams, eqm,
                                                     c["channel"], c["sign"], r.get("residual"), r.get("min_eig")))
        return cls(
            v=Polynomial.from_json(doc["v"], tx),
            n=n,
            T=float(doc["T"]),
            control=doc["control"],
            builder=doc["builder"],
            order=int(doc["order"]),
            margin=float(doc["margin"]),
            fingerprint=doc["problem_fingerprint"],
            problem_name=doc.get("problem_name", ""),
            zetas=zetas,
            constraints=constraints,
            meta=doc.get("meta", {}),
        )

    @classmethod
    def loads(cls, text: str) -> "BarrierCertificate":
        return cls.from_json(json.loads(text))


def constraint_space(kind: str, n: int) -> tuple[str, ...]:
    if kind in ("init", "term"):
        return x_space(n)
    if kind == "lie":
        return txu_space(n)
    return tx_space(n)
