"""Exact arithmetic on Z[1/p], the group Z[1/p] x Z[1/p], the parameter
space of compatible angle sequences, and the bicharacter multiplier.

All group data are Python integers; nothing here touches floating point
except :func:`phase_to_complex` and :func:`lambda_embed`.
"""
from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Union

from .errors import PrimeMismatchError

__all__ = [
    "PAdicRational",
    "GroupElement",
    "ThetaSequence",
    "PhaseAngle",
    "padic",
    "padic_norm",
    "group_add",
    "group_neg",
    "lambda_embed",
    "theta_at",
    "multiplier",
    "multiplier_from_presentation",
    "multiplier_value",
    "phase_to_complex",
    "format_padic",
    "parse_padic",
    "format_group",
    "parse_group",
    "is_prime",
]


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def _reduce(numerator: int, exponent: int, p: int) -> tuple[int, int]:
    if numerator == 0:
        return 0, 0
    while exponent > 0 and numerator % p == 0:
        numerator //= p
        exponent -= 1
    return numerator, exponent


def _valuation(n: int, p: int) -> int:
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


@dataclass(frozen=True, slots=True)
class PAdicRational:
    """The number ``numerator / prime**exponent`` in canonical form.

    Canonical means ``exponent == 0`` for zero and ``numerator`` prime to
    ``prime`` whenever ``exponent > 0``. Use :meth:`of` to build from an
    arbitrary presentation.
    """

    numerator: int
    exponent: int
    prime: int

    def __post_init__(self):
        if self.exponent < 0:
            raise ValueError("exponent must be nonnegative")
        if self.numerator == 0 and self.exponent != 0:
            raise ValueError("zero must have exponent 0")
        if self.exponent > 0 and self.numerator % self.prime == 0:
            raise ValueError(
                f"non-canonical presentation {self.numerator}/{self.prime}^{self.exponent}"
            )

    @classmethod
    def of(cls, numerator: int, exponent: int, prime: int) -> "PAdicRational":
        """Canonicalize ``numerator / prime**exponent``."""
        if exponent < 0:
            numerator *= prime ** (-exponent)
            exponent = 0
        n, k = _reduce(numerator, exponent, prime)
        return cls(n, k, prime)

    @classmethod
    def from_fraction(cls, value, prime: int) -> "PAdicRational":
        value = Fraction(value)
        den = value.denominator
        k = 0
        while den % prime == 0:
            den //= prime
            k += 1
        if den != 1:
            raise ValueError(f"{value} is not in Z[1/{prime}]")
        return cls.of(value.numerator, k, prime)

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.prime**self.exponent)

    def is_zero(self) -> bool:
        return self.numerator == 0

    def _check(self, other: "PAdicRational"):
        if other.prime != self.prime:
            raise PrimeMismatchError(f"prime {self.prime} vs {other.prime}")

    def __add__(self, other: "PAdicRational") -> "PAdicRational":
        self._check(other)
        p = self.prime
        k1, k2 = self.exponent, other.exponent
        if k1 >= k2:
            n = self.numerator + other.numerator * p ** (k1 - k2)
            k = k1
        else:
            n = self.numerator * p ** (k2 - k1) + other.numerator
            k = k2
        return PAdicRational(*_reduce(n, k, p), p)

    def __neg__(self) -> "PAdicRational":
        return PAdicRational(-self.numerator, self.exponent, self.prime)

    def __sub__(self, other: "PAdicRational") -> "PAdicRational":
        return self + (-other)

    def scaled_numerator(self, level: int) -> int:
        """Integer ``a`` with ``self == a / p**level``; needs ``level >= exponent``."""
        if level < self.exponent:
            raise ValueError(f"{self} does not lie in (1/p^{level})Z")
        return self.numerator * self.prime ** (level - self.exponent)

    def __str__(self) -> str:
        return format_padic(self)


def padic(value, prime: int) -> PAdicRational:
    """Coerce an int, Fraction, string or PAdicRational to canonical form."""
    if isinstance(value, PAdicRational):
        if value.prime != prime:
            raise PrimeMismatchError(f"prime {value.prime} vs {prime}")
        return value
    if isinstance(value, str):
        return parse_padic(value, prime)
    return PAdicRational.from_fraction(value, prime)


def padic_norm(x: PAdicRational) -> Fraction:
    """p-adic absolute value of ``x`` as an exact rational."""
    if x.numerator == 0:
        return Fraction(0)
    if x.exponent > 0:
        return Fraction(x.prime**x.exponent)
    return Fraction(1, x.prime ** _valuation(x.numerator, x.prime))


def lambda_embed(x: PAdicRational) -> tuple[float, tuple[int, int]]:
    """Diagonal embedding r -> (r, -iota(r)) into R x Q_p.

    The p-adic component is returned as the (numerator, exponent) data of
    ``-r``; the real one as a float.
    """
    return float(x.value), (-x.numerator, x.exponent)


@dataclass(frozen=True, slots=True)
class GroupElement:
    first: PAdicRational
    second: PAdicRational

    def __post_init__(self):
        if self.first.prime != self.second.prime:
            raise PrimeMismatchError("coordinates over different primes")

    @classmethod
    def of(cls, a, b, prime: int) -> "GroupElement":
        return cls(padic(a, prime), padic(b, prime))

    @classmethod
    def identity(cls, prime: int) -> "GroupElement":
        z = PAdicRational(0, 0, prime)
        return cls(z, z)

    @property
    def prime(self) -> int:
        return self.first.prime

    @property
    def level(self) -> int:
        """Smallest n with this element in (1/p^n)Z x (1/p^n)Z."""
        return max(self.first.exponent, self.second.exponent)

    def is_identity(self) -> bool:
        return self.first.numerator == 0 and self.second.numerator == 0

    def __add__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.first + other.first, self.second + other.second)

    def __neg__(self) -> "GroupElement":
        return GroupElement(-self.first, -self.second)

    def __sub__(self, other: "GroupElement") -> "GroupElement":
        return self + (-other)

    def __str__(self) -> str:
        return format_group(self)


def group_add(x: GroupElement, y: GroupElement) -> GroupElement:
    if x.prime != y.prime:
        raise PrimeMismatchError(f"prime {x.prime} vs {y.prime}")
    return x + y


def group_neg(x: GroupElement) -> GroupElement:
    return -x


@dataclass(frozen=True)
class ThetaSequence:
    """A point of Omega_p: theta_0 plus an eventually periodic digit stream.

    ``theta_n = (theta_{n-1} + d_n) / p`` where ``d_1, d_2, ...`` is the
    preperiod followed by the period repeated forever.
    """

    theta0: Fraction
    preperiod: tuple[int, ...] = ()
    period: tuple[int, ...] = (0,)
    prime: int = 2

    def __post_init__(self):
        object.__setattr__(self, "theta0", Fraction(self.theta0))
        object.__setattr__(self, "preperiod", tuple(int(d) for d in self.preperiod))
        object.__setattr__(self, "period", tuple(int(d) for d in self.period) or (0,))
        if not 0 <= self.theta0 < 1:
            raise ValueError("theta0 must lie in [0, 1)")
        for d in self.preperiod + self.period:
            if not 0 <= d < self.prime:
                raise ValueError(f"digit {d} outside 0..{self.prime - 1}")

    def digit(self, n: int) -> int:
        """Digit used to pass from theta_{n-1} to theta_n (n >= 1)."""
        if n < 1:
            raise ValueError("digits are indexed from 1")
        i = n - 1
        if i < len(self.preperiod):
            return self.preperiod[i]
        return self.period[(i - len(self.preperiod)) % len(self.period)]

    def at(self, n: int) -> Fraction:
        return _theta_at(self, n)

    def numden(self, n: int) -> tuple[int, int]:
        t = _theta_at(self, n)
        return t.numerator, t.denominator

    def to_dict(self) -> dict:
        return {
            "theta0": f"{self.theta0.numerator}/{self.theta0.denominator}",
            "preperiod": list(self.preperiod),
            "period": list(self.period),
        }

    @classmethod
    def from_dict(cls, data: dict, prime: int) -> "ThetaSequence":
        return cls(
            Fraction(str(data.get("theta0", "0"))),
            tuple(data.get("preperiod", ())),
            tuple(data.get("period", (0,))),
            prime,
        )

    def __iter__(self) -> Iterator[Fraction]:
        n = 0
        while True:
            yield self.at(n)
            n += 1


@lru_cache(maxsize=None)
def _theta_at(theta: ThetaSequence, n: int) -> Fraction:
    if n < 0:
        raise ValueError("n must be nonnegative")
    # iterate upward so deep levels never recurse
    t = theta.theta0
    for m in range(1, n + 1):
        t = (t + theta.digit(m)) / theta.prime
    return t


def theta_at(theta: ThetaSequence, n: int) -> Fraction:
    return theta.at(n)


@dataclass(frozen=True, slots=True)
class PhaseAngle:
    """Exact angle in [0, 1); the multiplier value is exp(2 pi i angle)."""

    angle: Fraction

    def __post_init__(self):
        a = Fraction(self.angle)
        object.__setattr__(self, "angle", a - math.floor(a))

    def __add__(self, other: "PhaseAngle") -> "PhaseAngle":
        return PhaseAngle(self.angle + other.angle)

    def __neg__(self) -> "PhaseAngle":
        return PhaseAngle(-self.angle)

    def __sub__(self, other: "PhaseAngle") -> "PhaseAngle":
        return PhaseAngle(self.angle - other.angle)

    def to_complex(self) -> complex:
        return phase_to_complex(self)


def phase_to_complex(a: PhaseAngle) -> complex:
    t = float(a.angle)
    if t > 0.5:
        t -= 1.0
    return cmath.exp(2j * math.pi * t)


def multiplier_from_presentation(
    theta: ThetaSequence, q1: int, k1: int, q4: int, k4: int
) -> PhaseAngle:
    """Angle theta_{k1+k4} * q1 * q4 mod 1 for any (possibly unreduced)
    presentation q1/p^k1 of the first coordinate of the left argument and
    q4/p^k4 of the second coordinate of the right argument."""
    if q1 == 0 or q4 == 0:
        return PhaseAngle(Fraction(0))
    num, den = theta.numden(k1 + k4)
    return PhaseAngle(Fraction((num * q1 * q4) % den, den))


def multiplier(theta: ThetaSequence, x: GroupElement, y: GroupElement) -> PhaseAngle:
    a, b = x.first, y.second
    return multiplier_from_presentation(theta, a.numerator, a.exponent, b.numerator, b.exponent)


def multiplier_value(theta: ThetaSequence, x: GroupElement, y: GroupElement) -> complex:
    """Complex value of the multiplier; fast path used inside products."""
    q1 = x.first.numerator
    q4 = y.second.numerator
    if q1 == 0 or q4 == 0:
        return 1.0 + 0.0j
    num, den = theta.numden(x.first.exponent + y.second.exponent)
    r = (num * q1 * q4) % den
    if r == 0:
        return 1.0 + 0.0j
    return _unit(r, den)


@lru_cache(maxsize=1 << 16)
def _unit(r: int, den: int) -> complex:
    return phase_to_complex(PhaseAngle(Fraction(r, den)))


# ---------------------------------------------------------------- text forms

_PADIC_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*(?:\^\s*(\d+))?)?\s*$")


def format_padic(x: PAdicRational) -> str:
    if x.exponent == 0:
        return str(x.numerator)
    return f"{x.numerator}/{x.prime}^{x.exponent}"


def parse_padic(text: str, prime: int) -> PAdicRational:
    """Parse ``"a"``, ``"a/p^k"`` or ``"a/b"`` with b a power of ``prime``."""
    m = _PADIC_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse {text!r} as an element of Z[1/{prime}]")
    num = int(m.group(1))
    if m.group(2) is None:
        return PAdicRational.of(num, 0, prime)
    base = int(m.group(2))
    if m.group(3) is not None:
        if base != prime:
            raise PrimeMismatchError(f"{text!r} is written over prime {base}, expected {prime}")
        return PAdicRational.of(num, int(m.group(3)), prime)
    return PAdicRational.from_fraction(Fraction(num, base), prime)


def format_group(g: GroupElement) -> str:
    return f"({format_padic(g.first)}, {format_padic(g.second)})"


def parse_group(text: str, prime: int) -> GroupElement:
    s = text.strip()
    if not (s.startswith("(") and s.endswith(")")):
        raise ValueError(f"cannot parse {text!r} as a group element")
    parts = s[1:-1].split(",")
    if len(parts) != 2:
        raise ValueError(f"cannot parse {text!r} as a group element")
    return GroupElement(parse_padic(parts[0], prime), parse_padic(parts[1], prime))
