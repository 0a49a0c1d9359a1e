"""Truncated Dirac operators and regular-representation matrices on length
balls, operator norms, commutator bounds, summability traces and
Monge-Kantorovich lower bounds between states.

Every operator is compressed to the span of the delta functions of a ball
B(R), ordered as in :class:`solspec.lengths.Ball`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .algebra import FiniteSupportElement, group_length, length_weighted_norm
from .core import GroupElement, PAdicRational, format_group, multiplier_value
from .errors import ConvergenceError, DomainError, ResourceCapError
from .lengths import Ball, LengthKind, LengthSpec, count_ball, enumerate_ball

DEFAULT_MAX_DIM = 5000
POWER_SEED = 20240601


# ------------------------------------------------------------------ bases


@dataclass(frozen=True, eq=False)
class BallBasis:
    ball: Ball
    elements: tuple  # Gamma coordinates, in ball order
    index: dict
    lengths: np.ndarray

    @classmethod
    def from_ball(cls, ball: Ball) -> "BallBasis":
        spec = ball.spec
        if spec.is_one_dimensional:
            raise ValueError("a basis needs a length on pairs")
        if spec.kind is LengthKind.Z2:
            p, n = spec.prime, spec.level
            elems = tuple(
                GroupElement(PAdicRational.of(a, n, p), PAdicRational.of(b, n, p)) for a, b in ball.elements
            )
        else:
            elems = tuple(ball.elements)
        index = {g: i for i, g in enumerate(elems)}
        lengths = np.array([float(L) for L in ball.lengths], dtype=float)
        lengths.setflags(write=False)
        return cls(ball, elems, index, lengths)

    @classmethod
    def build(
        cls, spec: LengthSpec, R, max_elements: int | None = None, max_dim: int = DEFAULT_MAX_DIM
    ) -> "BallBasis":
        """Enumerate B(R) and index it; the dimension cap is checked before enumeration."""
        n = count_ball(spec, R, max_elements)
        if n > max_dim:
            raise ResourceCapError(f"matrix dimension for {spec.label} R={R}", n, max_dim)
        return cls.from_ball(enumerate_ball(spec, R, max_elements))

    @property
    def spec(self) -> LengthSpec:
        return self.ball.spec

    @property
    def dim(self) -> int:
        return len(self.elements)

    @property
    def identity_index(self) -> int:
        return self.index[GroupElement.identity(self.spec.prime)]

    def __contains__(self, g) -> bool:
        return g in self.index


@dataclass(eq=False)
class TruncatedOperator:
    entries: np.ndarray
    basis: BallBasis
    diagonal: bool = False

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other: "TruncatedOperator") -> "TruncatedOperator":
        return TruncatedOperator(self.entries @ other.entries, self.basis, self.diagonal and other.diagonal)

    def __sub__(self, other: "TruncatedOperator") -> "TruncatedOperator":
        return TruncatedOperator(self.entries - other.entries, self.basis, self.diagonal and other.diagonal)


def _check_basis(spec: LengthSpec, basis: BallBasis):
    if basis.spec != spec:
        raise ValueError(f"basis was built for {basis.spec.label}, not {spec.label}")


def dirac_matrix(spec: LengthSpec, basis: BallBasis) -> TruncatedOperator:
    _check_basis(spec, basis)
    return TruncatedOperator(np.diag(basis.lengths.astype(complex)), basis, diagonal=True)


def regular_rep_matrix(f: FiniteSupportElement, basis: BallBasis) -> TruncatedOperator:
    """Entry (x, y) = f(x - y) sigma(x - y, y), restricted to the ball."""
    n = basis.dim
    M = np.zeros((n, n), dtype=complex)
    theta = f.theta
    index = basis.index
    terms = list(f.items())
    for j, y in enumerate(basis.elements):
        for a, c in terms:
            i = index.get(a + y)
            if i is not None:
                M[i, j] += c * multiplier_value(theta, a, y)
    return TruncatedOperator(M, basis)


# ---------------------------------------------------------- operator norm


def _is_partial_permutation(A: np.ndarray) -> bool:
    nz = A != 0
    return bool(nz.sum(axis=0).max(initial=0) <= 1 and nz.sum(axis=1).max(initial=0) <= 1)


def operator_norm(
    M: Union[TruncatedOperator, np.ndarray],
    tol: float = 1e-10,
    max_iter: int = 100_000,
    seed: int = POWER_SEED,
    block: int = 8,
) -> float:
    """Largest singular value.

    Diagonal matrices and matrices with at most one nonzero per row and
    column are evaluated exactly. Otherwise a seeded block power iteration on
    M^H M with Rayleigh-Ritz extraction runs until the extrapolated remaining
    change of the top Ritz value is below ``tol`` relative to it.
    """
    A = M.entries if isinstance(M, TruncatedOperator) else np.asarray(M)
    if A.size == 0:
        raise ValueError("empty operator")
    absA = np.abs(A)
    if not absA.any():
        return 0.0
    if (isinstance(M, TruncatedOperator) and M.diagonal) or _is_partial_permutation(A):
        return float(absA.max())

    n = A.shape[1]
    b = min(block, n)
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(n, b)) + 1j * rng.normal(size=(n, b)))
    AH = A.conj().T
    rho_prev = delta_prev = None
    for _ in range(max_iter):
        Z = AH @ (A @ Q)
        H = Q.conj().T @ Z
        rho = float(np.linalg.eigvalsh((H + H.conj().T) / 2)[-1])
        if rho <= 0:
            return 0.0
        Q, _ = np.linalg.qr(Z)
        if rho_prev is not None:
            delta = rho - rho_prev
            if abs(delta) <= 1e-15 * rho:
                return math.sqrt(rho)
            if delta_prev is not None and 0 < delta < delta_prev:
                r = delta / delta_prev
                remaining = delta * r / (1 - r)
                if remaining <= 0.1 * tol * rho:
                    return math.sqrt(rho + remaining)
            delta_prev = delta
        rho_prev = rho
    raise ConvergenceError(f"power iteration did not reach tol {tol} in {max_iter} steps")


# ------------------------------------------------------------ commutators


def commutator_matrix(f: FiniteSupportElement, spec: LengthSpec, basis: BallBasis, k: int = 1) -> TruncatedOperator:
    """k-fold commutator [D, [D, ... lambda(f)]]: entries (L(x) - L(y))^k lambda(f)_{xy}."""
    _check_basis(spec, basis)
    if k < 1:
        raise ValueError("k must be >= 1")
    lam = regular_rep_matrix(f, basis).entries
    d = basis.lengths
    return TruncatedOperator((d[:, None] - d[None, :]) ** k * lam, basis)


def commutator_norm(f: FiniteSupportElement, spec: LengthSpec, basis: BallBasis, tol: float = 1e-10) -> float:
    return operator_norm(commutator_matrix(f, spec, basis), tol)


def higher_commutator_norm(
    f: FiniteSupportElement, k: int, spec: LengthSpec, basis: BallBasis, tol: float = 1e-10
) -> float:
    return operator_norm(commutator_matrix(f, spec, basis, k), tol)


def multiplicativity_defect(
    f: FiniteSupportElement, g: FiniteSupportElement, spec: LengthSpec, R, max_elements: int | None = None
) -> float:
    """Max entry gap between lambda(f * g) and lambda(f) lambda(g) on B(R).

    The product is formed on B(R + pad) with pad the largest support length
    of the factors and compared on the inner block, so it is exact up to
    rounding.
    """
    from .algebra import twisted_convolve

    pad = max((group_length(spec, x) for x in list(f.coeffs) + list(g.coeffs)), default=Fraction(0))
    outer = BallBasis.build(spec, Fraction(R) + pad, max_elements)
    inner = [outer.index[x] for x in outer.elements if group_length(spec, x) <= Fraction(R)]
    A = regular_rep_matrix(twisted_convolve(f, g), outer).entries
    B = regular_rep_matrix(f, outer).entries @ regular_rep_matrix(g, outer).entries
    ix = np.ix_(inner, inner)
    return float(np.abs(A[ix] - B[ix]).max(initial=0.0))


# ---------------------------------------------------- spectra and traces


@dataclass
class SpectralReport:
    spec: LengthSpec
    t: float
    n_max: int
    eigenvalues: list  # exact lengths with multiplicity, ascending
    ball_counts: list  # |B(2^n)|, n = 0..n_max
    annulus_counts: list  # |B(1)|, then |B(2^n) \ B(2^(n-1))|
    partial_traces: list  # S_n
    proved_constant: int
    empirical_constant: Fraction
    bound_proved: float
    bound_proved_partial: float
    bound_empirical: float
    bound_empirical_partial: float

    @property
    def increments(self) -> list:
        S = self.partial_traces
        return [S[n] - S[n - 1] for n in range(1, len(S))]

    def annulus_bound_holds(self) -> bool:
        C = self.empirical_constant
        b1 = self.ball_counts[0]
        return all(
            self.annulus_counts[n] <= (C - 1) * C ** (n - 1) * b1 for n in range(1, self.n_max + 1)
        )

    def to_dict(self, include_eigenvalues: bool = False) -> dict:
        d = {
            "spec": self.spec.label,
            "t": self.t,
            "n_max": self.n_max,
            "ball_counts": self.ball_counts,
            "annulus_counts": self.annulus_counts,
            "partial_traces": self.partial_traces,
            "increments": self.increments,
            "proved_constant": self.proved_constant,
            "empirical_constant": str(self.empirical_constant),
            "bound_proved": _finite_or_str(self.bound_proved),
            "bound_proved_partial": _finite_or_str(self.bound_proved_partial),
            "bound_empirical": _finite_or_str(self.bound_empirical),
            "bound_empirical_partial": _finite_or_str(self.bound_empirical_partial),
            "annulus_bound_holds": self.annulus_bound_holds(),
        }
        if include_eigenvalues:
            d["eigenvalues"] = [str(L) for L in self.eigenvalues]
        return d


def _finite_or_str(x: float):
    return x if math.isfinite(x) else "inf"


def summability_bound(C, b1: int, t: float, n_terms: int | None = None) -> float:
    """max{1, C-1} |B(1)| [1 + sum_{n>=1} (C/2^t)^(n-1)], summed to ``n_terms`` or to infinity."""
    C = float(C)
    ratio = C / 2.0**t
    front = max(1.0, C - 1.0) * b1
    if n_terms is None:
        if ratio >= 1:
            return math.inf
        return front * (1.0 + 1.0 / (1.0 - ratio))
    return front * (1.0 + math.fsum(ratio**k for k in range(n_terms)))


def _trace_terms(lengths, t: float) -> list:
    return [(1.0 + float(L) ** 2) ** (-t / 2) for L in lengths]


def summability_trace(
    spec: LengthSpec, t: float, n_max: int, max_elements: int | None = None
) -> SpectralReport:
    """Partial traces S_n of (1 + D^2)^(-t/2) over B(2^n), n = 0..n_max, with the
    geometric annulus bound evaluated at the proved and the observed doubling constant."""
    if t <= 0:
        raise ValueError("t must be positive")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    ball = enumerate_ball(spec, 2**n_max, max_elements)
    lengths = list(ball.lengths)  # ascending
    ball_counts = [sum(1 for L in lengths if L <= 2**n) for n in range(n_max + 1)]
    annulus = [ball_counts[0]] + [ball_counts[n] - ball_counts[n - 1] for n in range(1, n_max + 1)]
    partial = []
    for n in range(n_max + 1):
        terms = _trace_terms(lengths[: ball_counts[n]], t)
        terms.sort(reverse=True)
        partial.append(math.fsum(terms))
    emp = max(Fraction(ball_counts[n + 1], ball_counts[n]) for n in range(n_max))
    C = spec.proved_constant
    b1 = ball_counts[0]
    return SpectralReport(
        spec=spec,
        t=t,
        n_max=n_max,
        eigenvalues=lengths,
        ball_counts=ball_counts,
        annulus_counts=annulus,
        partial_traces=partial,
        proved_constant=C,
        empirical_constant=emp,
        bound_proved=summability_bound(C, b1, t),
        bound_proved_partial=summability_bound(C, b1, t, n_max),
        bound_empirical=summability_bound(emp, b1, t),
        bound_empirical_partial=summability_bound(emp, b1, t, n_max),
    )


def resolvent_matrix(D: TruncatedOperator, lam: complex) -> TruncatedOperator:
    """(D - lam)^(-1) for a diagonal D and non-real lam."""
    if not D.diagonal:
        raise ValueError("resolvent is only formed for diagonal operators")
    lam = complex(lam)
    if lam.imag == 0:
        raise DomainError("lam must have nonzero imaginary part")
    d = np.diag(D.entries)
    return TruncatedOperator(np.diag(1.0 / (d - lam)), D.basis, diagonal=True)


def resolvent_tail_bound(R, t: float) -> float:
    """Bound (R^2 + t^2)^(-1/2) on |L - it|^(-1) off the ball B(R)."""
    return 1.0 / math.hypot(float(R), t)


# --------------------------------------------------------------- states


@dataclass(frozen=True)
class CanonicalTrace:
    """f -> f(e)."""

    def evaluate(self, a: FiniteSupportElement, basis: BallBasis | None = None) -> complex:
        return a[GroupElement.identity(a.prime)]

    def to_dict(self):
        return {"kind": "trace"}


@dataclass(frozen=True, eq=False)
class VectorState:
    """a -> <lambda(a) xi, xi> for a finitely supported unit vector xi."""

    xi: dict = field(default_factory=dict)

    def __post_init__(self):
        nrm = math.sqrt(math.fsum(abs(c) ** 2 for c in self.xi.values()))
        if abs(nrm - 1.0) > 1e-12:
            raise ValueError(f"vector state needs a unit vector, got norm {nrm}")

    @classmethod
    def normalized(cls, xi: dict) -> "VectorState":
        nrm = math.sqrt(math.fsum(abs(c) ** 2 for c in xi.values()))
        return cls({g: c / nrm for g, c in xi.items()})

    def vector(self, basis: BallBasis) -> np.ndarray:
        v = np.zeros(basis.dim, dtype=complex)
        for g, c in self.xi.items():
            if g not in basis.index:
                raise ValueError(f"{format_group(g)} lies outside the truncation basis")
            v[basis.index[g]] = c
        return v

    def evaluate(self, a: FiniteSupportElement, basis: BallBasis) -> complex:
        v = self.vector(basis)
        return complex(np.vdot(v, regular_rep_matrix(a, basis).entries @ v))

    def to_dict(self):
        return {"kind": "vector", "xi": {format_group(g): [c.real, c.imag] for g, c in self.xi.items()}}


StateSpec = Union[CanonicalTrace, VectorState]


def mk_lower_bound(
    phi: StateSpec,
    psi: StateSpec,
    candidates: Sequence[FiniteSupportElement],
    spec: LengthSpec,
    basis: BallBasis,
    tol: float = 1e-12,
) -> float:
    """max over candidates a of |phi(a) - psi(a)| / sum L|a|.

    Dividing by sum L|a| puts each candidate in the unit ball of the
    commutator seminorm, so the result is a lower bound for the
    Monge-Kantorovich distance.
    """
    _check_basis(spec, basis)
    best = 0.0
    for a in candidates:
        if not a.is_self_adjoint(tol):
            raise DomainError("mk candidates must be self-adjoint")
        scale = length_weighted_norm(a, spec)
        if scale == 0:
            continue  # a multiple of the unit: states agree on it
        val = abs(phi.evaluate(a, basis) - psi.evaluate(a, basis)) / scale
        best = max(best, val)
    return best
