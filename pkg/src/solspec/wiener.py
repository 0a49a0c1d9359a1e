"""Neumann-series inversion in the twisted l1 algebra, tail-decay evidence
for inverses, the two-step inversion trick and a truncated-spectrum
consistency check for self-adjoint elements."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .algebra import (
    FiniteSupportElement,
    TailProfile,
    group_length,
    mu_q,
    prune,
    tail_norm,
    twisted_convolve,
    weighted_norm,
)
from .dirac import BallBasis, regular_rep_matrix
from .errors import ConvergenceError, DomainError
from .lengths import LengthSpec

PRUNE_THRESHOLD = 1e-16


def _isqrt_floor(N: int) -> int:
    return math.isqrt(N)


def _outside_sqrt(spec: LengthSpec, N: int):
    # L > sqrt(N) tested exactly as L^2 > N
    return lambda g: group_length(spec, g) ** 2 > N


def _inside_sqrt(spec: LengthSpec, N: int):
    return lambda g: group_length(spec, g) ** 2 <= N


def _outside(spec: LengthSpec, N):
    N = Fraction(N)
    return lambda g: group_length(spec, g) > N


def joli2_bound(f: FiniteSupportElement, N: int, spec: LengthSpec) -> float:
    """[sqrt N]^2 ||(1 - chi_sqrtN) f|| + 4 ||f|| / 2^sqrt(N), a bound on the
    l1 mass of sum_{n>=1} f^n outside B(N) when ||f|| <= 1/2."""
    r = _isqrt_floor(N)
    outside = math.fsum(abs(c) for g, c in f.items() if group_length(spec, g) ** 2 > N)
    return r * r * outside + 4.0 * f.l1_norm() / 2.0 ** math.sqrt(N)


@dataclass
class InversionReport:
    input_norm: float
    terms: int  # N: g = sum_{n<=N} f^n
    residual: float
    residual_history: list
    geometric_bound: float  # 2 ||f||^(N+1)
    series_bound: float  # 4 ||f|| / 2^(N+1)
    pruned_mass: float
    pruning_budget: float
    converged: bool
    support_size: int
    weighted_norms: dict = field(default_factory=dict)  # s -> [||g_n||_{1,s} for n = 0..N]
    mu_estimates: dict = field(default_factory=dict)  # q -> mu_q(g_N)
    joli2: dict = field(default_factory=dict)  # N -> (tail of g - delta_e, bound)

    def to_dict(self) -> dict:
        return {
            "input_norm": self.input_norm,
            "terms": self.terms,
            "residual": self.residual,
            "residual_history": self.residual_history,
            "geometric_bound": self.geometric_bound,
            "series_bound": self.series_bound,
            "pruned_mass": self.pruned_mass,
            "pruning_budget": self.pruning_budget,
            "converged": self.converged,
            "support_size": self.support_size,
            "weighted_norms": {str(s): v for s, v in self.weighted_norms.items()},
            "mu_estimates": {str(q): v for q, v in self.mu_estimates.items()},
            "joli2": {str(N): {"tail": a, "bound": b} for N, (a, b) in self.joli2.items()},
        }


def neumann_inverse(
    f: FiniteSupportElement,
    tol: float = 1e-12,
    N_max: int = 200,
    spec: LengthSpec | None = None,
    s_schedule: Sequence[float] = (),
    q_schedule: Sequence[int] = (),
    joli_N: Sequence[int] = (),
    prune_threshold: float = PRUNE_THRESHOLD,
) -> tuple[FiniteSupportElement, InversionReport]:
    """g = sum_{n=0}^N f^n inverting delta_e - f, with N minimal such that
    ||f^(N+1)|| (the residual before pruning) is at most ``tol``, or N = N_max.
    The reported residual ||(delta_e - f) * g - delta_e|| is computed directly
    and decides ``converged``.

    Coefficients below ``prune_threshold`` are dropped from each power; the
    residual can grow by at most three times the dropped mass (one factor
    ||delta_e - f|| <= 3/2 and one geometric factor 1/(1 - ||f||) <= 2).
    """
    nf = f.l1_norm()
    if not nf < 0.5:
        raise DomainError(f"Neumann inversion needs ||f||_1 < 1/2, got {nf}")
    if (s_schedule or q_schedule or joli_N) and spec is None:
        raise ValueError("weighted norms and tails need a length spec")
    theta = f.theta
    one = FiniteSupportElement.unit(theta)
    g = one
    term = one
    pruned = 0.0
    history = []  # ||f^(n+1)||, the exact residual of g_n before pruning
    wn = {s: [weighted_norm(g, s, spec)] for s in s_schedule}
    N = 0
    while True:
        nxt = twisted_convolve(term, f)
        history.append(nxt.l1_norm())
        if history[-1] <= tol or N >= N_max:
            break
        term, lost = prune(nxt, prune_threshold)
        pruned += lost
        g = g + term
        N += 1
        for s in s_schedule:
            wn[s].append(weighted_norm(g, s, spec))
    residual = (twisted_convolve(one - f, g) - one).l1_norm()

    report = InversionReport(
        input_norm=nf,
        terms=N,
        residual=residual,
        residual_history=history,
        geometric_bound=2.0 * nf ** (N + 1),
        series_bound=4.0 * nf / 2.0 ** (N + 1),
        pruned_mass=pruned,
        pruning_budget=3.0 * pruned,
        converged=residual <= tol,
        support_size=len(g),
        weighted_norms=wn,
    )
    if spec is not None:
        report.mu_estimates = {q: mu_q(g, q, spec) for q in q_schedule}
        gm = g - one
        prof = TailProfile(gm, spec)
        report.joli2 = {M: (prof.tail(M), joli2_bound(f, M, spec)) for M in joli_N}
    return g, report


@dataclass
class EvidenceTable:
    N_values: list
    tails: list  # ||(1 - chi_N) g||
    scaled: dict  # q -> [N^q tail(N)]
    mu_estimates: dict  # q -> running max over N_range
    joli2_bounds: list | None = None  # per N, when the source f is known
    joli2_constants: dict | None = None  # q -> max_N N^q joli2(N)
    joli2_ok: bool | None = None

    def to_dict(self) -> dict:
        d = {
            "N": self.N_values,
            "tails": self.tails,
            "scaled": {str(q): v for q, v in self.scaled.items()},
            "mu_estimates": {str(q): v for q, v in self.mu_estimates.items()},
        }
        if self.joli2_bounds is not None:
            d["joli2_bounds"] = self.joli2_bounds
            d["joli2_constants"] = {str(q): v for q, v in self.joli2_constants.items()}
            d["joli2_ok"] = self.joli2_ok
        return d


def h1inf_evidence(
    g: FiniteSupportElement,
    spec: LengthSpec,
    q_schedule: Sequence[int],
    N_range: Sequence[int],
    source: FiniteSupportElement | None = None,
    slack: float = 0.0,
) -> EvidenceTable:
    """Tabulate N^q ||(1 - chi_N) g|| over N_range.

    When ``g`` is a Neumann inverse of delta_e - ``source``, each tail is also
    compared with the composite bound (joli2_bound) plus ``slack``, which
    should cover pruning and truncation of the series.
    """
    Ns = [int(N) for N in N_range]
    if any(N < 1 for N in Ns):
        raise ValueError("N_range must hold integers >= 1")
    prof = TailProfile(g, spec)
    tails = [prof.tail(N) for N in Ns]
    scaled = {q: [N**q * t for N, t in zip(Ns, tails)] for q in q_schedule}
    mus = {q: max(v, default=0.0) for q, v in scaled.items()}
    table = EvidenceTable(Ns, tails, scaled, mus)
    if source is not None:
        bounds = [joli2_bound(source, N, spec) for N in Ns]
        table.joli2_bounds = bounds
        table.joli2_constants = {q: max((N**q * b for N, b in zip(Ns, bounds)), default=0.0) for q in q_schedule}
        # delta_e never lies outside B(N) for N >= 1, so tail(g) = tail(g - delta_e)
        table.joli2_ok = all(t <= b + slack for t, b in zip(tails, bounds))
    return table


def joli1_check(f: FiniteSupportElement, N: int, n: int, spec: LengthSpec) -> tuple[float, float, float]:
    """Compare (1 - chi_N) f^n with its n-term expansion through chi_sqrtN.

    Returns (l1 gap between the two sides, l1 norm of the last term
    (1 - chi_N)(chi_sqrtN f)^n, term-by-term bound n ||(1 - chi_sqrtN) f|| ||f||^(n-1)).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    out_N = _outside(spec, N)
    near = f.restrict(_inside_sqrt(spec, N))
    far = f.restrict(_outside_sqrt(spec, N))
    theta = f.theta
    one = FiniteSupportElement.unit(theta)

    def pw(x, m):
        r = one
        for _ in range(m):
            r = twisted_convolve(r, x)
        return r

    lhs = pw(f, n).restrict(out_N)
    rhs = FiniteSupportElement.zero(theta)
    for k in range(n):
        piece = twisted_convolve(twisted_convolve(pw(near, k), far), pw(f, n - k - 1))
        rhs = rhs + piece.restrict(out_N)
    last = pw(near, n).restrict(out_N)
    rhs = rhs + last
    bound = n * far.l1_norm() * f.l1_norm() ** (n - 1)
    return (lhs - rhs).l1_norm(), last.l1_norm(), bound


def general_inverse(
    h: FiniteSupportElement,
    h_prime: FiniteSupportElement,
    tol: float = 1e-12,
    N_max: int = 200,
) -> FiniteSupportElement:
    """h^{-1} = h' * (h * h')^{-1}, inverting h * h' by a Neumann series.

    The operative condition ||delta_e - h * h'||_1 < 1/2 is checked directly.
    """
    one = FiniteSupportElement.unit(h.theta)
    k = twisted_convolve(h, h_prime)
    f = one - k
    if not f.l1_norm() < 0.5:
        raise DomainError(f"||delta_e - h h'||_1 = {f.l1_norm()} is not below 1/2")
    kinv, rep = neumann_inverse(f, tol=tol, N_max=N_max)
    if not rep.converged:
        raise ConvergenceError(f"Neumann series stopped at residual {rep.residual} after {rep.terms} terms")
    return twisted_convolve(h_prime, kinv)


def inverse_residuals(h: FiniteSupportElement, g: FiniteSupportElement) -> tuple[float, float]:
    """(||h g - delta_e||_1, ||g h - delta_e||_1)."""
    one = FiniteSupportElement.unit(h.theta)
    return (twisted_convolve(h, g) - one).l1_norm(), (twisted_convolve(g, h) - one).l1_norm()


# ------------------------------------------------------- spectral check


@dataclass
class ConsistencyPoint:
    c: complex
    radii: list
    min_singular: list
    l1_certified: bool
    status: str  # certified-invertible | gap-closing | indeterminate
    agreement: str  # agree | disagree | indeterminate-consistent

    def to_dict(self) -> dict:
        return {
            "c": [self.c.real, self.c.imag],
            "radii": [str(r) for r in self.radii],
            "min_singular": self.min_singular,
            "l1_certified": self.l1_certified,
            "status": self.status,
            "agreement": self.agreement,
        }


def spectral_consistency(
    f: FiniteSupportElement,
    basis_radii: Sequence,
    c_values: Sequence[complex],
    spec: LengthSpec,
    tol: float = 1e-10,
    gap_threshold: float = 0.1,
    max_elements: int | None = None,
) -> list[ConsistencyPoint]:
    """Compare the l1 invertibility certificate for c - f with the smallest
    singular value of its truncations on growing balls.

    ||f||_1 < |c| certifies invertibility, and then every truncation has
    smallest singular value at least |c| - ||f||_1. Otherwise the
    truncations only give one-sided evidence: a shrinking gap is reported
    as gap-closing and anything else as indeterminate.
    """
    if not f.is_self_adjoint(tol):
        raise DomainError("spectral_consistency needs a self-adjoint element")
    radii = [Fraction(r) for r in basis_radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("basis radii must increase")
    bases = [BallBasis.build(spec, R, max_elements) for R in radii]
    nf = f.l1_norm()
    lam_f = [regular_rep_matrix(f, B).entries for B in bases]
    out = []
    for c in c_values:
        c = complex(c)
        smins = []
        for B, F in zip(bases, lam_f):
            M = c * np.eye(B.dim) - F
            smins.append(float(np.linalg.svd(M, compute_uv=False).min()))
        certified = nf < abs(c)
        if certified:
            status = "certified-invertible"
            floor = abs(c) - nf
            agreement = "agree" if all(s >= floor - tol for s in smins) else "disagree"
        else:
            closing = smins[-1] <= gap_threshold or smins[-1] <= 0.5 * smins[0]
            status = "gap-closing" if closing else "indeterminate"
            agreement = "indeterminate-consistent"
        out.append(ConsistencyPoint(c, radii, smins, certified, status, agreement))
    return out
