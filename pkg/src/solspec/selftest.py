"""Small-scale invariant suite behind ``solspec selftest``.

Every check is seeded and reports only deterministic quantities, so two
runs produce identical reports.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable

import numpy as np

from .algebra import (
    FiniteSupportElement,
    adjoint,
    length_weighted_norm,
    random_element,
    twisted_convolve,
    weighted_norm,
)
from .core import GroupElement, PAdicRational, ThetaSequence, multiplier, padic_norm
from .dirac import (
    BallBasis,
    CanonicalTrace,
    VectorState,
    commutator_norm,
    higher_commutator_norm,
    mk_lower_bound,
    operator_norm,
    summability_trace,
)
from .inductive import LevelElement, check_functoriality, resolvent_gap, verify_morphism, weyl_phase_error
from .lengths import LengthSpec, ball_sandwich_check, doubling_report, enumerate_ball, length
from .wiener import general_inverse, inverse_residuals, neumann_inverse, spectral_consistency

SEED = 12345
EXAMPLE_THETA = ThetaSequence(Fraction(2, 3), (), (0, 1), 2)


def _core_examples():
    p = 2
    ok = (
        padic_norm(PAdicRational.of(0, 0, p)) == 0
        and padic_norm(PAdicRational.of(3, 2, p)) == 4
        and padic_norm(PAdicRational.of(12, 0, p)) == Fraction(1, 4)
        and GroupElement.of(Fraction(3, 4), 1, p) + GroupElement.of(Fraction(1, 4), -1, p) == GroupElement.of(1, 0, p)
        and EXAMPLE_THETA.at(1) == Fraction(1, 3)
        and multiplier(EXAMPLE_THETA, GroupElement.of(Fraction(1, 2), 0, p), GroupElement.of(0, Fraction(1, 2), p)).angle
        == Fraction(2, 3)
    )
    return ok, {}


def _cocycle():
    rng = np.random.default_rng(SEED)
    ball = enumerate_ball(LengthSpec.sum(2), 8).elements
    th = EXAMPLE_THETA
    bad = 0
    for _ in range(200):
        x, y, z = (ball[int(i)] for i in rng.integers(len(ball), size=3))
        lhs = multiplier(th, x, y) + multiplier(th, x + y, z)
        rhs = multiplier(th, y, z) + multiplier(th, x, y + z)
        bic = multiplier(th, x + y, z) == multiplier(th, x, z) + multiplier(th, y, z)
        bad += (lhs != rhs) + (not bic)
    return bad == 0, {"violations": bad, "triples": 200}


def _lengths():
    base = LengthSpec.base(2)
    ball = enumerate_ball(base, 2)
    ok = [str(x) for x in ball] == ["0", "1", "-1"]
    ok &= length(base, PAdicRational.of(3, 2, 2)) == Fraction(19, 4)
    sandwich = {f"{p},{d}": ball_sandwich_check(p, d).holds for p in (2, 3) for d in (1, 2)}
    ok &= all(sandwich.values())
    return ok, {"sandwich": sandwich}


def _doubling():
    a = doubling_report(LengthSpec.base(2), [1, 2, 4, 8])
    b = doubling_report(LengthSpec.sum(2), [1, 2])
    return a.passed and b.passed, {"base_max_ratiop": str(a.max_ratiop), "sum_max_ratio2": str(b.max_ratio2)}


def _weyl():
    errs = [weyl_phase_error(EXAMPLE_THETA, n) for n in range(3)]
    return max(errs) <= 1e-12, {"phase_errors": errs}


def _algebra():
    rng = np.random.default_rng(SEED)
    sp = LengthSpec.sum(2)
    pool = list(enumerate_ball(sp, 4).elements)
    th = EXAMPLE_THETA
    worst_assoc = 0.0
    sub_ok = iso_ok = True
    for _ in range(20):
        f, g, h = (random_element(th, pool, rng, 4, l1=1.0) for _ in range(3))
        worst_assoc = max(
            worst_assoc,
            (twisted_convolve(twisted_convolve(f, g), h) - twisted_convolve(f, twisted_convolve(g, h))).l1_norm(),
        )
        for s in (0, 1, 2, 3):
            nf, ng = weighted_norm(f, s, sp), weighted_norm(g, s, sp)
            sub_ok &= weighted_norm(twisted_convolve(f, g), s, sp) <= nf * ng * (1 + 1e-9)
            iso_ok &= abs(weighted_norm(adjoint(f), s, sp) - nf) <= 1e-9 * nf
    ok = worst_assoc <= 1e-10 and sub_ok and iso_ok
    return ok, {"associativity_gap_ok": worst_assoc <= 1e-10, "submultiplicative": sub_ok, "adjoint_isometry": iso_ok}


def _dirac():
    rng = np.random.default_rng(SEED)
    sp = LengthSpec.sum(2)
    B = BallBasis.build(sp, 4)
    th = EXAMPLE_THETA
    exact_ok = all(
        abs(commutator_norm(FiniteSupportElement.delta(g, th), sp, B) - float(length(sp, g))) <= 1e-8
        for g in B.elements
    )
    bound_ok = True
    for _ in range(10):
        f = random_element(th, list(B.elements), rng, 4)
        bound_ok &= commutator_norm(f, sp, B) <= length_weighted_norm(f, sp) + 1e-8
        for k in (1, 2, 3):
            bound_ok &= higher_commutator_norm(f, k, sp, B) <= weighted_norm(f, k, sp) + 1e-6
    A = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    svd_ok = abs(operator_norm(A) - np.linalg.norm(A, 2)) <= 1e-9 * np.linalg.norm(A, 2)
    g0 = GroupElement.of(1, 1, 2)
    d = FiniteSupportElement.delta(g0, th)
    a = (d + adjoint(d)).scale(1 / (2 * float(length(sp, g0))))
    psi = VectorState.normalized({GroupElement.identity(2): 1.0, g0: 1.0})
    mk = mk_lower_bound(CanonicalTrace(), psi, [a], sp, B)
    mk_ok = abs(mk - 1 / (2 * float(length(sp, g0)))) <= 1e-12
    ok = exact_ok and bound_ok and svd_ok and mk_ok
    return ok, {"delta_exact": exact_ok, "commutator_bounds": bound_ok, "svd_oracle": svd_ok, "mk_lower_bound": mk}


def _summability():
    r = summability_trace(LengthSpec.sum(2), 41, 3)
    ok = all(s <= r.bound_proved for s in r.partial_traces) and math.isfinite(r.bound_proved)
    ok &= r.annulus_bound_holds()
    return ok, {"partial_traces": r.partial_traces, "bound": r.bound_proved}


def _inductive():
    th = EXAMPLE_THETA
    ok = True
    for j, k in ((0, 1), (1, 2), (0, 2)):
        samples = [LevelElement.delta(j, z, th) for z in ((0, 0), (1, 0), (0, 1), (1, -1))]
        ok &= verify_morphism(j, k, samples, 4).passed
    samples = [LevelElement.delta(0, z, th) for z in ((1, 0), (0, 1), (2, -3))]
    ok &= check_functoriality(0, 1, 2, samples)
    gaps = [resolvent_gap(j, 1.0, 4).gap for j in range(3)]
    ok &= abs(gaps[0] - (25 / 4 + 1) ** -0.5) <= 1e-12
    ok &= all(b <= a for a, b in zip(gaps, gaps[1:]))
    return ok, {"gaps": gaps}


def _wiener():
    th = EXAMPLE_THETA
    g0 = GroupElement.of(1, 0, 2)
    f = FiniteSupportElement.delta(g0, th, 0.4)
    _, rep = neumann_inverse(f, tol=1e-14, N_max=20)
    exact_ok = abs(rep.residual - 0.4 ** (rep.terms + 1)) <= 1e-15
    one = FiniteSupportElement.unit(th)
    h = one - FiniteSupportElement.delta(g0, th, 0.3)
    hp = one + FiniteSupportElement.delta(g0, th, 0.3)
    res = inverse_residuals(h, general_inverse(h, hp))
    inv_ok = max(res) <= 1e-8
    d = FiniteSupportElement.delta(GroupElement.of(Fraction(1, 2), 1, 2), th)
    sa = (d + adjoint(d)).scale(0.5)
    pts = spectral_consistency(sa, [2, 4], [3.0], LengthSpec.sum(2))
    sc_ok = pts[0].status == "certified-invertible" and pts[0].agreement == "agree"
    return exact_ok and inv_ok and sc_ok, {"neumann_terms": rep.terms, "inverse_residuals": list(res)}


CHECKS: list[tuple[str, Callable]] = [
    ("core-examples", _core_examples),
    ("cocycle-bicharacter", _cocycle),
    ("lengths-and-sandwich", _lengths),
    ("doubling", _doubling),
    ("weyl-relation", _weyl),
    ("algebra-properties", _algebra),
    ("dirac-commutators", _dirac),
    ("summability", _summability),
    ("inductive-system", _inductive),
    ("wiener-inversion", _wiener),
]


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def run_selftest() -> dict:
    results = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed run
            ok, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
        results.append({"name": name, "passed": bool(ok), "detail": _plain(detail)})
    return {"checks": results, "passed": all(r["passed"] for r in results)}
