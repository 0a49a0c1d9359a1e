"""Finitely supported elements of the twisted convolution algebra over
Gamma = Z[1/p]^2, with the weighted l1 norms and tail functionals used to
describe smooth elements."""
from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .core import (
    GroupElement,
    PAdicRational,
    ThetaSequence,
    _unit,
    format_group,
    multiplier_value,
    parse_group,
)
from .errors import ContextMismatchError
from .lengths import LengthKind, LengthSpec, length


def group_length(spec: LengthSpec, g: GroupElement) -> Fraction:
    """Length of a Gamma element under a pair length (pulled-back specs read Gamma_n coordinates)."""
    if spec.kind is LengthKind.Z2:
        n = spec.level
        return length(spec, (g.first.scaled_numerator(n), g.second.scaled_numerator(n)))
    return length(spec, g)


@dataclass(frozen=True, eq=False)
class FiniteSupportElement:
    """A finitely supported function Gamma -> C together with its multiplier parameter.

    Exact zeros are dropped on construction; small floating values are kept
    until :func:`prune` is called explicitly.
    """

    coeffs: Mapping[GroupElement, complex]
    theta: ThetaSequence

    def __post_init__(self):
        clean = {g: complex(c) for g, c in self.coeffs.items() if c != 0}
        for g in clean:
            if g.prime != self.theta.prime:
                raise ContextMismatchError(f"{g} is not over prime {self.theta.prime}")
        object.__setattr__(self, "coeffs", MappingProxyType(clean))

    # construction
    @classmethod
    def zero(cls, theta: ThetaSequence) -> "FiniteSupportElement":
        return cls({}, theta)

    @classmethod
    def delta(cls, g: GroupElement, theta: ThetaSequence, c: complex = 1.0) -> "FiniteSupportElement":
        return cls({g: c}, theta)

    @classmethod
    def unit(cls, theta: ThetaSequence) -> "FiniteSupportElement":
        return cls.delta(GroupElement.identity(theta.prime), theta)

    # access
    @property
    def prime(self) -> int:
        return self.theta.prime

    @property
    def support(self) -> list[GroupElement]:
        return list(self.coeffs)

    def __getitem__(self, g: GroupElement) -> complex:
        return self.coeffs.get(g, 0j)

    def __len__(self):
        return len(self.coeffs)

    def items(self):
        return self.coeffs.items()

    def l1_norm(self) -> float:
        return math.fsum(abs(c) for c in self.coeffs.values())

    # linear structure
    def _check(self, other: "FiniteSupportElement"):
        if other.theta != self.theta:
            raise ContextMismatchError("elements carry different multiplier parameters")

    def __add__(self, other: "FiniteSupportElement") -> "FiniteSupportElement":
        self._check(other)
        out = dict(self.coeffs)
        for g, c in other.coeffs.items():
            out[g] = out.get(g, 0j) + c
        return FiniteSupportElement(out, self.theta)

    def __neg__(self) -> "FiniteSupportElement":
        return FiniteSupportElement({g: -c for g, c in self.coeffs.items()}, self.theta)

    def __sub__(self, other: "FiniteSupportElement") -> "FiniteSupportElement":
        return self + (-other)

    def scale(self, a: complex) -> "FiniteSupportElement":
        return FiniteSupportElement({g: a * c for g, c in self.coeffs.items()}, self.theta)

    def __mul__(self, other):
        # element * element is the twisted product; element * number scales
        if isinstance(other, FiniteSupportElement):
            return twisted_convolve(self, other)
        return self.scale(other)

    def __rmul__(self, a):
        return self.scale(a)

    def adjoint(self) -> "FiniteSupportElement":
        return adjoint(self)

    def distance(self, other: "FiniteSupportElement") -> float:
        """l1 distance."""
        return (self - other).l1_norm()

    def is_self_adjoint(self, tol: float = 1e-12) -> bool:
        return self.distance(self.adjoint()) <= tol

    def restrict(self, keep) -> "FiniteSupportElement":
        return FiniteSupportElement({g: c for g, c in self.coeffs.items() if keep(g)}, self.theta)

    # serialization
    def to_json_list(self) -> list[dict]:
        rows = [
            {"gamma": format_group(g), "re": c.real, "im": c.imag}
            for g, c in self.coeffs.items()
        ]
        rows.sort(key=lambda r: r["gamma"])
        return rows

    @classmethod
    def from_json_list(cls, rows: Iterable[dict], theta: ThetaSequence) -> "FiniteSupportElement":
        out: dict[GroupElement, complex] = {}
        for r in rows:
            g = parse_group(r["gamma"], theta.prime)
            out[g] = out.get(g, 0j) + complex(float(r.get("re", 0.0)), float(r.get("im", 0.0)))
        return cls(out, theta)

    def dumps(self) -> str:
        return json.dumps(self.to_json_list(), sort_keys=True)

    def __repr__(self):
        terms = ", ".join(f"{format_group(g)}: {c:.6g}" for g, c in self.coeffs.items())
        return f"FiniteSupportElement({{{terms}}})"


def _common_level(*elements: FiniteSupportElement) -> int:
    return max((g.level for f in elements for g in f.coeffs), default=0)


def twisted_convolve(f: FiniteSupportElement, g: FiniteSupportElement) -> FiniteSupportElement:
    """(f * g)(x) = sum_y f(y) g(x - y) sigma(y, x - y).

    Both supports are read as integer pairs at their common level K, where
    the multiplier angle is theta_{2K} a_1 b_2; this equals the angle from
    any other presentation, so the result is independent of K.
    """
    f._check(g)
    theta = f.theta
    p = theta.prime
    K = _common_level(f, g)
    num, den = theta.numden(2 * K)
    fz = [(x.first.scaled_numerator(K), x.second.scaled_numerator(K), c) for x, c in f.coeffs.items()]
    gz = [(y.first.scaled_numerator(K), y.second.scaled_numerator(K), c) for y, c in g.coeffs.items()]
    acc: dict[tuple[int, int], complex] = {}
    get = acc.get
    for a1, a2, ca in fz:
        t = num * a1
        for b1, b2, cb in gz:
            r = (t * b2) % den
            v = ca * cb if r == 0 else ca * cb * _unit(r, den)
            key = (a1 + b1, a2 + b2)
            acc[key] = get(key, 0j) + v
    out = {
        GroupElement(PAdicRational.of(a, K, p), PAdicRational.of(b, K, p)): c for (a, b), c in acc.items()
    }
    return FiniteSupportElement(out, theta)


def power(f: FiniteSupportElement, n: int) -> FiniteSupportElement:
    if n < 0:
        raise ValueError("n must be nonnegative")
    out = FiniteSupportElement.unit(f.theta)
    for _ in range(n):
        out = twisted_convolve(out, f)
    return out


def adjoint(f: FiniteSupportElement) -> FiniteSupportElement:
    """f*(x) = conj(f(-x) sigma(x, -x))."""
    theta = f.theta
    out = {}
    for y, c in f.coeffs.items():
        x = -y
        out[x] = (c * multiplier_value(theta, x, y)).conjugate()
    return FiniteSupportElement(out, theta)


def weighted_norm(f: FiniteSupportElement, s: float, spec: LengthSpec) -> float:
    """sum |f(x)| (1 + L(x))^s."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if s == 0:
        return f.l1_norm()
    return math.fsum(abs(c) * (1.0 + float(group_length(spec, g))) ** s for g, c in f.items())


def length_weighted_norm(f: FiniteSupportElement, spec: LengthSpec) -> float:
    """sum L(x) |f(x)|, the Lipschitz bound for the commutator with the Dirac operator."""
    return math.fsum(float(group_length(spec, g)) * abs(c) for g, c in f.items())


class TailProfile:
    """Support lengths in ascending order with suffix l1 masses, so tails
    outside any radius are a bisection away."""

    def __init__(self, f: FiniteSupportElement, spec: LengthSpec):
        rows = sorted((group_length(spec, g), abs(c)) for g, c in f.items())
        self.lengths = [L for L, _ in rows]
        suffix = [0.0] * (len(rows) + 1)
        for i in range(len(rows) - 1, -1, -1):
            suffix[i] = suffix[i + 1] + rows[i][1]
        self.suffix = suffix

    def tail(self, N) -> float:
        """l1 mass strictly outside B(N)."""
        return self.suffix[bisect_right(self.lengths, Fraction(N))]


def tail_norm(f: FiniteSupportElement, N, spec: LengthSpec) -> float:
    """l1 mass of f outside the closed ball B(N)."""
    N = Fraction(N)
    return math.fsum(abs(c) for g, c in f.items() if group_length(spec, g) > N)


def mu_q(f: FiniteSupportElement, q: int, spec: LengthSpec) -> float:
    """sup over integers N >= 1 of N^q times the l1 mass outside B(N).

    The tail only drops at integers below a support length, so the supremum
    is a maximum over N = ceil(L) - 1 for the support lengths L.
    """
    if q < 0:
        raise ValueError("q must be nonnegative")
    prof = TailProfile(f, spec)
    best = 0.0
    for N in sorted({math.ceil(L) - 1 for L in prof.lengths}):
        if N >= 1:
            best = max(best, N**q * prof.tail(N))
    return best


def prune(f: FiniteSupportElement, threshold: float) -> tuple[FiniteSupportElement, float]:
    """Drop coefficients with modulus below ``threshold``; return the dropped l1 mass too."""
    kept, dropped = {}, []
    for g, c in f.items():
        if abs(c) < threshold:
            dropped.append(abs(c))
        else:
            kept[g] = c
    return FiniteSupportElement(kept, f.theta), math.fsum(dropped)


def random_element(
    theta: ThetaSequence,
    pool: list[GroupElement],
    rng: np.random.Generator,
    terms: int,
    l1: float | None = None,
) -> FiniteSupportElement:
    """Random complex combination of ``terms`` distinct elements drawn from ``pool``."""
    terms = min(terms, len(pool))
    idx = rng.choice(len(pool), size=terms, replace=False)
    c = rng.normal(size=terms) + 1j * rng.normal(size=terms)
    if l1 is not None:
        c *= l1 / np.abs(c).sum()
    return FiniteSupportElement({pool[int(i)]: complex(v) for i, v in zip(idx, c)}, theta)
