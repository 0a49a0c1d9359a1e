"""Length functions on Z[1/p] and Z[1/p]^2, exact ball enumeration, and
checks of the cardinality and doubling bounds those balls obey.

Radii and lengths are :class:`fractions.Fraction` throughout, so an element
whose length equals the radius is always inside the ball.
"""
from __future__ import annotations

import enum
import math
import os
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

from .core import GroupElement, PAdicRational, padic_norm
from .errors import DomainError, ResourceCapError

DEFAULT_MAX_ELEMENTS = 10**6
ENV_MAX_ELEMENTS = "SOLSPEC_MAX_ELEMENTS"


def default_cap() -> int:
    raw = os.environ.get(ENV_MAX_ELEMENTS)
    if raw:
        cap = int(raw)
        if cap <= 0:
            raise ValueError(f"{ENV_MAX_ELEMENTS} must be positive")
        return cap
    return DEFAULT_MAX_ELEMENTS


class LengthKind(str, enum.Enum):
    BASE = "base"  # L_p on Z[1/p]
    RESTRICTED_BASE = "restricted-base"  # L_{p,n} on (1/p^n)Z
    SUM = "sum"  # L_p^Sigma on Z[1/p]^2
    RESTRICTED = "restricted"  # L_{p,n}^Sigma on Gamma_n
    Z2 = "z2"  # L_{p,n}^Sigma pulled back to Z^2


Point = Union[PAdicRational, GroupElement, tuple]


@dataclass(frozen=True)
class LengthSpec:
    kind: LengthKind
    prime: int
    level: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", LengthKind(self.kind))
        needs_level = self.kind in (LengthKind.RESTRICTED_BASE, LengthKind.RESTRICTED, LengthKind.Z2)
        if needs_level and (self.level is None or self.level < 0):
            raise ValueError(f"{self.kind.value} length needs a level n >= 0")
        if not needs_level and self.level is not None:
            raise ValueError(f"{self.kind.value} length takes no level")

    @classmethod
    def base(cls, p):
        return cls(LengthKind.BASE, p)

    @classmethod
    def sum(cls, p):
        return cls(LengthKind.SUM, p)

    @classmethod
    def restricted(cls, p, n):
        return cls(LengthKind.RESTRICTED, p, n)

    @classmethod
    def restricted_base(cls, p, n):
        return cls(LengthKind.RESTRICTED_BASE, p, n)

    @classmethod
    def z2(cls, p, n):
        return cls(LengthKind.Z2, p, n)

    @classmethod
    def parse(cls, text: str, p: int) -> "LengthSpec":
        """Parse ``base``, ``sum``, ``restricted:n``, ``restricted-base:n`` or ``z2:n``."""
        name, _, lvl = text.strip().partition(":")
        kind = LengthKind(name)
        return cls(kind, p, int(lvl) if lvl else None)

    @property
    def label(self) -> str:
        return self.kind.value if self.level is None else f"{self.kind.value}:{self.level}"

    @property
    def is_one_dimensional(self) -> bool:
        return self.kind in (LengthKind.BASE, LengthKind.RESTRICTED_BASE)

    @property
    def proved_constant(self) -> int:
        """Doubling constant proved for this length: 4p^8 in one coordinate, its fourth power on pairs."""
        c = 4 * self.prime**8
        return c if self.is_one_dimensional else c**4

    def identity(self):
        p = self.prime
        if self.kind is LengthKind.Z2:
            return (0, 0)
        if self.is_one_dimensional:
            return PAdicRational(0, 0, p)
        return GroupElement.identity(p)


@lru_cache(maxsize=1 << 18)
def base_length(r: PAdicRational) -> Fraction:
    """|r| + ||r||_p."""
    return abs(r.value) + padic_norm(r)


def length(spec: LengthSpec, x: Point) -> Fraction:
    kind = spec.kind
    if kind is LengthKind.BASE:
        return base_length(x)
    if kind is LengthKind.RESTRICTED_BASE:
        if x.exponent > spec.level:
            raise DomainError(f"{x} is not in (1/p^{spec.level})Z")
        return base_length(x)
    if kind is LengthKind.SUM:
        return base_length(x.first) + base_length(x.second)
    if kind is LengthKind.RESTRICTED:
        if x.level > spec.level:
            raise DomainError(f"{x} is not in Gamma_{spec.level}")
        return base_length(x.first) + base_length(x.second)
    # Z2
    z1, z2 = x
    p, n = spec.prime, spec.level
    return base_length(PAdicRational.of(z1, n, p)) + base_length(PAdicRational.of(z2, n, p))


def _coord_key(x: PAdicRational):
    # magnitude first, positive before negative
    return (abs(x.value), x.numerator < 0)


def _point_key(spec: LengthSpec, x, L):
    if spec.kind is LengthKind.Z2:
        return (L, abs(x[0]), x[0] < 0, abs(x[1]), x[1] < 0)
    if spec.is_one_dimensional:
        return (L,) + _coord_key(x)
    return (L,) + _coord_key(x.first) + _coord_key(x.second)


@dataclass(frozen=True)
class Ball:
    """Elements of length at most ``radius``, ordered by (length, coordinates).

    Coordinates compare by absolute value, positive before negative, first
    coordinate before second.
    """

    spec: LengthSpec
    radius: Fraction
    elements: tuple
    lengths: tuple

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, x):
        return x in self.element_set

    @property
    def element_set(self) -> frozenset:
        s = self.__dict__.get("_set")
        if s is None:
            s = frozenset(self.elements)
            object.__setattr__(self, "_set", s)
        return s

    def length_of(self, x) -> Fraction:
        return length(self.spec, x)


# ------------------------------------------------------------- enumeration


def _integer_stratum(p: int, R: Fraction) -> list[tuple[PAdicRational, Fraction]]:
    out = [(PAdicRational(0, 0, p), Fraction(0))]
    for m in range(1, math.floor(R) + 1):
        x = PAdicRational(m, 0, p)
        L = base_length(x)
        if L <= R:
            out.append((x, L))
            out.append((-x, L))
    return out


def _stratum_bound(p: int, j: int, R: Fraction) -> int:
    # |m| / p^j + p^j <= R  <=>  |m| <= p^j (R - p^j)
    return math.floor(p**j * (R - p**j))


def _count_integer_stratum(p: int, R: Fraction) -> int:
    n = 1
    for m in range(1, math.floor(R) + 1):
        if m + Fraction(1, p ** _val(m, p)) <= R:
            n += 2
    return n


def _val(m: int, p: int) -> int:
    v = 0
    while m % p == 0:
        m //= p
        v += 1
    return v


def _max_exponent(spec: LengthSpec) -> int | None:
    return spec.level if spec.kind in (LengthKind.RESTRICTED_BASE, LengthKind.RESTRICTED, LengthKind.Z2) else None


def _count_base(p: int, R: Fraction, max_exp: int | None) -> int:
    if R < 0:
        return 0
    total = _count_integer_stratum(p, R)
    j = 1
    while p**j < R and (max_exp is None or j <= max_exp):
        M = _stratum_bound(p, j, R)
        total += 2 * (M - M // p)
        j += 1
    return total


def _base_points(p: int, R: Fraction, max_exp: int | None) -> list[tuple[PAdicRational, Fraction]]:
    if R < 0:
        return []
    pts = _integer_stratum(p, R)
    j = 1
    while p**j < R and (max_exp is None or j <= max_exp):
        M = _stratum_bound(p, j, R)
        pj = p**j
        for m in range(1, M + 1):
            if m % p:
                x = PAdicRational(m, j, p)
                L = Fraction(m, pj) + pj
                pts.append((x, L))
                pts.append((-x, L))
        j += 1
    pts.sort(key=lambda t: (t[1],) + _coord_key(t[0]))
    return pts


def count_ball(spec: LengthSpec, R, max_elements: int | None = None) -> int:
    """|B(R)| computed without materializing the ball.

    Only the one-coordinate ball is held in memory for pair lengths, so the
    cap applies to that list rather than to the returned count.
    """
    R = Fraction(R)
    p = spec.prime
    mx = _max_exponent(spec)
    if spec.is_one_dimensional:
        return _count_base(p, R, mx)
    cap = default_cap() if max_elements is None else max_elements
    n1 = _count_base(p, R, mx)
    if n1 > cap:
        raise ResourceCapError(f"coordinate ball {spec.label} R={R}", n1, cap)
    pts = _base_points(p, R, mx)
    lengths = [L for _, L in pts]
    return sum(bisect_right(lengths, R - L) for L in lengths)


def enumerate_ball(spec: LengthSpec, R, max_elements: int | None = None) -> Ball:
    """Exactly the set {x : length(x) <= R}, in canonical order.

    Raises :class:`ResourceCapError` before building anything when the
    ball would hold more than ``max_elements`` points.
    """
    R = Fraction(R)
    if R < 0:
        raise ValueError("radius must be nonnegative")
    cap = default_cap() if max_elements is None else max_elements
    p = spec.prime
    mx = _max_exponent(spec)

    if spec.is_one_dimensional:
        n = _count_base(p, R, mx)
        if n > cap:
            raise ResourceCapError(f"ball {spec.label} R={R}", n, cap)
        pts = _base_points(p, R, mx)
        return Ball(spec, R, tuple(x for x, _ in pts), tuple(L for _, L in pts))

    pts = _base_points(p, R, mx)
    lengths = [L for _, L in pts]
    cuts = [bisect_right(lengths, R - L) for L in lengths]
    n = sum(cuts)
    if n > cap:
        raise ResourceCapError(f"ball {spec.label} R={R}", n, cap)
    rows = []
    for (x1, L1), c in zip(pts, cuts):
        for x2, L2 in pts[:c]:
            rows.append((GroupElement(x1, x2), L1 + L2))
    if spec.kind is LengthKind.Z2:
        lvl = spec.level
        rows = [((g.first.scaled_numerator(lvl), g.second.scaled_numerator(lvl)), L) for g, L in rows]
    rows.sort(key=lambda t: _point_key(spec, t[0], t[1]))
    return Ball(spec, R, tuple(x for x, _ in rows), tuple(L for _, L in rows))


# ------------------------------------------------------------ bound checks


@dataclass
class SandwichResult:
    prime: int
    d: int
    ball_size: int
    lower_count: int  # 2p^{2(d-1)} + 1
    upper_count: int  # 2p^{2d} + 1
    inner_ok: bool
    outer_ok: bool
    counterexamples: list

    @property
    def counts_ok(self) -> bool:
        return self.lower_count <= self.ball_size <= self.upper_count

    @property
    def holds(self) -> bool:
        return self.inner_ok and self.outer_ok and self.counts_ok


def ball_sandwich_check(p: int, d: int, max_elements: int | None = None) -> SandwichResult:
    """Check {m/p^(d-1): |m| <= p^(2(d-1))} in B(p^d) in {m/p^(d-1): |m| <= p^(2d)}
    by explicit membership, plus the induced cardinality bounds."""
    if d < 1:
        raise ValueError("d must be >= 1")
    spec = LengthSpec.base(p)
    R = Fraction(p**d)
    ball = enumerate_ball(spec, R, max_elements)
    members = ball.element_set
    bad = []

    inner_bound = p ** (2 * (d - 1))
    inner_ok = True
    for m in range(-inner_bound, inner_bound + 1):
        x = PAdicRational.of(m, d - 1, p)
        if x not in members:
            inner_ok = False
            bad.append(("inner", str(x)))

    outer_bound = p ** (2 * d)
    outer_ok = True
    for x in ball.elements:
        if x.exponent > d - 1 or abs(x.scaled_numerator(d - 1)) > outer_bound:
            outer_ok = False
            bad.append(("outer", str(x)))

    return SandwichResult(
        prime=p,
        d=d,
        ball_size=len(ball),
        lower_count=2 * inner_bound + 1,
        upper_count=2 * outer_bound + 1,
        inner_ok=inner_ok,
        outer_ok=outer_ok,
        counterexamples=bad,
    )


@dataclass
class DoublingRow:
    R: Fraction
    size: int
    size_double: int
    size_dilated: int  # |B(pR)|
    bound: int

    @property
    def ratio2(self) -> Fraction:
        return Fraction(self.size_double, self.size)

    @property
    def ratiop(self) -> Fraction:
        return Fraction(self.size_dilated, self.size)

    passed: bool = True


@dataclass
class DoublingReport:
    spec: LengthSpec
    rows: list
    proved_constant: int

    @property
    def max_ratio2(self) -> Fraction:
        return max((r.ratio2 for r in self.rows), default=Fraction(0))

    @property
    def max_ratiop(self) -> Fraction:
        return max((r.ratiop for r in self.rows), default=Fraction(0))

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    CSV_HEADER = ("R", "|B(R)|", "|B(2R)|", "|B(pR)|", "ratio2", "ratiop", "proved_bound", "pass")

    def csv_rows(self):
        for r in self.rows:
            yield (
                str(r.R),
                r.size,
                r.size_double,
                r.size_dilated,
                f"{float(r.ratio2):.6g}",
                f"{float(r.ratiop):.6g}",
                r.bound,
                "true" if r.passed else "false",
            )


def doubling_report(spec: LengthSpec, radii: Iterable, max_elements: int | None = None) -> DoublingReport:
    """Ball counts at R, 2R and pR with exact comparison against the proved constant.

    One-coordinate lengths are checked for bounded p-dilation (which implies
    doubling since p >= 2); lengths on pairs are checked for doubling.
    """
    cap = default_cap() if max_elements is None else max_elements
    C = spec.proved_constant
    p = spec.prime
    rows = []
    for R in radii:
        R = Fraction(R)
        if R < 1:
            raise ValueError("doubling radii must be >= 1")
        n1, n2, np_ = (count_ball(spec, radius, cap) for radius in (R, 2 * R, p * R))
        ok = n2 <= C * n1
        if spec.is_one_dimensional:
            ok = ok and np_ <= C * n1
        rows.append(DoublingRow(R, n1, n2, np_, C, ok))
    return DoublingReport(spec, rows, C)


@dataclass
class GrowthEstimate:
    slope: float
    intercept: float
    residual: float
    radii: list
    counts: list


def growth_exponent(spec: LengthSpec, Rmax, max_elements: int | None = None) -> GrowthEstimate:
    """Least-squares slope of log|B(R)| against log R over R = p, p^2, ... <= Rmax."""
    p = spec.prime
    Rmax = Fraction(Rmax)
    if Rmax < p * p:
        raise ValueError(f"Rmax must be at least p^2 = {p * p}")
    cap = default_cap() if max_elements is None else max_elements
    radii, counts = [], []
    R = p
    while R <= Rmax:
        n = count_ball(spec, R, cap)
        radii.append(R)
        counts.append(n)
        R *= p
    x = np.log(np.array(radii, dtype=float))
    y = np.log(np.array(counts, dtype=float))
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    resid = float(np.sqrt(res[0] / len(x))) if len(res) else 0.0
    return GrowthEstimate(float(coef[0]), float(coef[1]), resid, radii, counts)
