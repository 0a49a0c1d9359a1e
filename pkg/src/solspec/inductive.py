"""The ladder of subgroups Gamma_n = (1/p^n Z)^2, their identification with
Z^2, the connecting maps between levels and numerical checks that these
maps form morphisms of truncated spectral triples."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .algebra import FiniteSupportElement, group_length, twisted_convolve
from .core import GroupElement, PAdicRational, PhaseAngle, ThetaSequence, format_group, phase_to_complex
from .dirac import BallBasis
from .errors import DomainError
from .lengths import LengthSpec, enumerate_ball, length

Z2 = tuple  # (int, int)


@dataclass(frozen=True)
class LevelIndex:
    n: int
    prime: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("level must be nonnegative")

    def contains(self, g: GroupElement) -> bool:
        return in_gamma_n(g, self.n)


def in_gamma_n(g: GroupElement, n: int) -> bool:
    return g.first.exponent <= n and g.second.exponent <= n


def upsilon(n: int, z: Z2, p: int) -> GroupElement:
    """(a, b) -> (a/p^n, b/p^n)."""
    a, b = z
    return GroupElement(PAdicRational.of(a, n, p), PAdicRational.of(b, n, p))


def upsilon_inv(n: int, g: GroupElement) -> Z2:
    if not in_gamma_n(g, n):
        raise DomainError(f"{format_group(g)} is not in Gamma_{n}")
    return (g.first.scaled_numerator(n), g.second.scaled_numerator(n))


def level_multiplier(theta: ThetaSequence, n: int, z: Z2, w: Z2) -> PhaseAngle:
    """Multiplier on Z^2 at level n: angle theta_{2n} z_1 w_2."""
    num, den = theta.numden(2 * n)
    return PhaseAngle(Fraction((num * z[0] * w[1]) % den, den))


@dataclass(frozen=True, eq=False)
class LevelElement:
    """Finitely supported function on Z^2 read at level n."""

    level: int
    coeffs: Mapping[Z2, complex]
    theta: ThetaSequence

    def __post_init__(self):
        clean = {(int(a), int(b)): complex(c) for (a, b), c in self.coeffs.items() if c != 0}
        object.__setattr__(self, "coeffs", MappingProxyType(clean))

    @classmethod
    def delta(cls, level: int, z: Z2, theta: ThetaSequence, c: complex = 1.0) -> "LevelElement":
        return cls(level, {tuple(z): c}, theta)

    def to_gamma(self) -> FiniteSupportElement:
        p = self.theta.prime
        return FiniteSupportElement({upsilon(self.level, z, p): c for z, c in self.coeffs.items()}, self.theta)

    @classmethod
    def from_gamma(cls, f: FiniteSupportElement, level: int) -> "LevelElement":
        return cls(level, {upsilon_inv(level, g): c for g, c in f.items()}, f.theta)

    def same_as(self, other: "LevelElement") -> bool:
        return self.level == other.level and dict(self.coeffs) == dict(other.coeffs)


def phi_embed(j: int, k: int, f: LevelElement) -> LevelElement:
    """Connecting map: z -> p^(k-j) z, coefficients unchanged."""
    if j > k:
        raise ValueError("phi_embed needs j <= k")
    if f.level != j:
        raise ValueError(f"element lives at level {f.level}, not {j}")
    s = f.theta.prime ** (k - j)
    return LevelElement(k, {(s * a, s * b): c for (a, b), c in f.coeffs.items()}, f.theta)


def inclusion_isometry(j: int, k: int, vec: Mapping[Z2, complex], p: int) -> dict:
    """Isometry l2(Z^2) at level j -> level k induced by Gamma_j inside Gamma_k."""
    if j > k:
        raise ValueError("inclusion needs j <= k")
    s = p ** (k - j)
    return {(s * a, s * b): c for (a, b), c in vec.items()}


def l2_norm(vec: Mapping) -> float:
    return math.sqrt(math.fsum(abs(c) ** 2 for c in vec.values()))


def level_rep_matrix(f: LevelElement, basis_z: Sequence[Z2]) -> np.ndarray:
    """Regular representation at level n computed purely in Z^2 coordinates."""
    index = {z: i for i, z in enumerate(basis_z)}
    M = np.zeros((len(basis_z), len(basis_z)), dtype=complex)
    for col, y in enumerate(basis_z):
        for x, c in f.coeffs.items():
            i = index.get((x[0] + y[0], x[1] + y[1]))
            if i is not None:
                M[i, col] += c * phase_to_complex(level_multiplier(f.theta, f.level, x, y))
    return M


def _level_length(p: int, n: int, z: Z2) -> Fraction:
    return length(LengthSpec.z2(p, n), z)


@dataclass
class MorphismCheckReport:
    j: int
    k: int
    samples: int
    basis_radius: Fraction
    smooth_ok: bool
    intertwining_deviation: float
    dirac_deviation: Fraction
    isometry_deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return (
            self.smooth_ok
            and self.intertwining_deviation <= self.tol
            and self.dirac_deviation <= self.tol
            and self.isometry_deviation <= self.tol
        )

    def to_dict(self) -> dict:
        return {
            "j": self.j,
            "k": self.k,
            "samples": self.samples,
            "basis_radius": str(self.basis_radius),
            "smooth_subalgebra": self.smooth_ok,
            "intertwining_deviation": self.intertwining_deviation,
            "dirac_deviation": str(self.dirac_deviation),
            "isometry_deviation": self.isometry_deviation,
            "tol": self.tol,
            "passed": self.passed,
        }


def verify_morphism(
    j: int,
    k: int,
    samples: Sequence[LevelElement],
    basis_radius,
    tol: float = 0.0,
    max_elements: int | None = None,
) -> MorphismCheckReport:
    """Check the three morphism conditions between levels j and k.

    (1) the connecting map sends finitely supported elements to finitely
    supported elements; (2) I pi_j(a) = pi_k(phi(a)) I on the columns of the
    level-j ball, using truncations padded by the support length of a; (3)
    I D_j = D_k I, i.e. lengths agree exactly on Gamma_j.
    """
    if j > k:
        raise ValueError("verify_morphism needs j <= k")
    if not samples:
        raise ValueError("need at least one sample")
    theta = samples[0].theta
    p = theta.prime
    R = Fraction(basis_radius)
    spec_j, spec_k = LengthSpec.z2(p, j), LengthSpec.z2(p, k)
    s = p ** (k - j)

    pad = max(_level_length(p, j, z) for f in samples for z in f.coeffs) if any(f.coeffs for f in samples) else 0
    outer_j = enumerate_ball(spec_j, R + pad, max_elements)
    outer_k = enumerate_ball(spec_k, R + pad, max_elements)
    basis_k = BallBasis.from_ball(outer_k)
    idx_j = {z: i for i, z in enumerate(outer_j.elements)}
    idx_k = {z: i for i, z in enumerate(outer_k.elements)}
    inner = [z for z, L in zip(outer_j.elements, outer_j.lengths) if L <= R]

    # I as a 0/1 matrix from the padded level-j ball to the padded level-k ball
    Imat = np.zeros((len(outer_k), len(outer_j)))
    for z, col in idx_j.items():
        Imat[idx_k[(s * z[0], s * z[1])], col] = 1.0

    smooth_ok = True
    inter_dev = 0.0
    iso_dev = 0.0
    for f in samples:
        if f.level != j:
            raise ValueError(f"sample at level {f.level}, expected {j}")
        g = phi_embed(j, k, f)
        smooth_ok &= len(g.coeffs) == len(f.coeffs)
        pi_j = level_rep_matrix(f, outer_j.elements)
        pi_k = _gamma_rep(g, basis_k)
        cols_j = [idx_j[z] for z in inner]
        cols_k = [idx_k[(s * z[0], s * z[1])] for z in inner]
        lhs = Imat @ pi_j[:, cols_j]
        rhs = pi_k[:, cols_k]
        inter_dev = max(inter_dev, float(np.abs(lhs - rhs).max(initial=0.0)))
        iso_dev = max(iso_dev, abs(l2_norm(inclusion_isometry(j, k, f.coeffs, p)) - l2_norm(f.coeffs)))

    dirac_dev = Fraction(0)
    for z in outer_j.elements:
        Lj = _level_length(p, j, z)
        Lk = _level_length(p, k, (s * z[0], s * z[1]))
        dirac_dev = max(dirac_dev, abs(Lj - Lk))

    return MorphismCheckReport(j, k, len(samples), R, smooth_ok, inter_dev, dirac_dev, iso_dev, tol)


def _gamma_rep(g: LevelElement, basis: BallBasis) -> np.ndarray:
    from .dirac import regular_rep_matrix

    return regular_rep_matrix(g.to_gamma(), basis).entries


def check_functoriality(j: int, k: int, l: int, samples: Sequence[LevelElement]) -> bool:
    """phi_{k,l} o phi_{j,k} == phi_{j,l} and I_{k,l} I_{j,k} == I_{j,l}, exactly."""
    for f in samples:
        if not phi_embed(k, l, phi_embed(j, k, f)).same_as(phi_embed(j, l, f)):
            return False
        p = f.theta.prime
        two = inclusion_isometry(k, l, inclusion_isometry(j, k, f.coeffs, p), p)
        if two != inclusion_isometry(j, l, f.coeffs, p):
            return False
    return True


def weyl_generators(theta: ThetaSequence, n: int) -> tuple[FiniteSupportElement, FiniteSupportElement]:
    """Delta generators U = delta(1/p^n, 0), V = delta(0, 1/p^n) of level n."""
    p = theta.prime
    U = FiniteSupportElement.delta(upsilon(n, (1, 0), p), theta)
    V = FiniteSupportElement.delta(upsilon(n, (0, 1), p), theta)
    return U, V


def weyl_phase_error(theta: ThetaSequence, n: int) -> float:
    """l1 distance between U V and exp(2 pi i theta_{2n}) V U at level n."""
    U, V = weyl_generators(theta, n)
    phase = phase_to_complex(PhaseAngle(theta.at(2 * n)))
    return (twisted_convolve(U, V) - twisted_convolve(V, U).scale(phase)).l1_norm()


@dataclass
class ResolventGap:
    j: int
    t: float
    radius: Fraction
    gap: float
    tail_bound: float
    witness: GroupElement | None

    def to_dict(self) -> dict:
        return {
            "j": self.j,
            "t": self.t,
            "radius": str(self.radius),
            "gap": self.gap,
            "tail_bound": self.tail_bound,
            "witness": format_group(self.witness) if self.witness is not None else None,
        }


def resolvent_gap(j: int, t: float, R, p: int = 2, max_elements: int | None = None) -> ResolventGap:
    """Norm of R_it(D) - I_j R_it(D_j) I_j^* on B(R): max of |L - it|^(-1) over B(R) minus Gamma_j.

    Both resolvents are diagonal in the delta basis, so the difference is
    read off the lengths of the ball elements outside Gamma_j.
    """
    if t == 0:
        raise DomainError("t must be nonzero")
    R = Fraction(R)
    if R < 1:
        raise ValueError("R must be >= 1")
    ball = enumerate_ball(LengthSpec.sum(p), R, max_elements)
    witness = None
    for g, L in zip(ball.elements, ball.lengths):
        if not in_gamma_n(g, j):
            witness = g  # first in ball order has the least length
            break
    gap = 0.0 if witness is None else 1.0 / abs(complex(float(group_length(LengthSpec.sum(p), witness)), -t))
    return ResolventGap(j, t, R, gap, 1.0 / math.hypot(float(R), t), witness)
