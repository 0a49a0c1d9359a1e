import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solspec.algebra import (
    FiniteSupportElement,
    adjoint,
    length_weighted_norm,
    random_element,
    weighted_norm,
)
from solspec.core import GroupElement, ThetaSequence
from solspec.dirac import (
    BallBasis,
    CanonicalTrace,
    VectorState,
    commutator_matrix,
    commutator_norm,
    dirac_matrix,
    higher_commutator_norm,
    mk_lower_bound,
    multiplicativity_defect,
    operator_norm,
    regular_rep_matrix,
    resolvent_matrix,
    resolvent_tail_bound,
    summability_bound,
    summability_trace,
)
from solspec.errors import DomainError, ResourceCapError
from solspec.lengths import LengthSpec, enumerate_ball, length

TH = ThetaSequence(Fraction(2, 3), (), (0, 1), 2)
SUM = LengthSpec.sum(2)
B4 = BallBasis.build(SUM, 4)
B6 = BallBasis.build(SUM, 6)


def g(a, b):
    return GroupElement.of(a, b, 2)


def svd_norm(A):
    return float(np.linalg.norm(A, 2))


class TestBasis:
    def test_identity_first(self):
        assert B4.identity_index == 0
        assert B4.dim == len(enumerate_ball(SUM, 4))

    def test_rejects_one_dimensional(self):
        with pytest.raises(ValueError):
            BallBasis.build(LengthSpec.base(2), 4)

    def test_dimension_cap(self):
        with pytest.raises(ResourceCapError):
            BallBasis.build(SUM, 8, max_dim=100)

    def test_z2_basis_in_gamma_coordinates(self):
        B = BallBasis.build(LengthSpec.z2(2, 1), 4)
        assert all(x.level <= 1 for x in B.elements)


class TestDirac:
    def test_entries(self):
        D = dirac_matrix(SUM, B4)
        assert D.diagonal
        assert D.entries[B4.identity_index, B4.identity_index] == 0
        assert D.entries[B4.index[g(1, 1)], B4.index[g(1, 1)]] == 4.0

    def test_trace_matches_exact_sum(self):
        D = dirac_matrix(SUM, B6)
        exact = sum(length(SUM, x) for x in B6.elements)
        assert np.trace(D.entries) == pytest.approx(float(exact), rel=1e-14)

    def test_basis_mismatch(self):
        with pytest.raises(ValueError):
            dirac_matrix(LengthSpec.restricted(2, 1), B4)


class TestRegularRep:
    def test_unit_is_identity(self):
        M = regular_rep_matrix(FiniteSupportElement.unit(TH), B4).entries
        assert np.array_equal(M, np.eye(B4.dim))

    def test_delta_is_partial_permutation(self):
        x0 = g(Fraction(1, 2), 1)
        M = regular_rep_matrix(FiniteSupportElement.delta(x0, TH), B6).entries
        for j, eta in enumerate(B6.elements):
            col = np.flatnonzero(M[:, j])
            if x0 + eta in B6.index:
                assert list(col) == [B6.index[x0 + eta]]
                assert abs(abs(M[col[0], j]) - 1) <= 1e-14
            else:
                assert len(col) == 0

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6))
    def test_norm_below_l1(self, seed):
        f = random_element(TH, list(B4.elements), np.random.default_rng(seed), 5)
        assert operator_norm(regular_rep_matrix(f, B4)) <= f.l1_norm() + 1e-10

    def test_multiplicative_on_padded_ball(self):
        rng = np.random.default_rng(3)
        pool = list(enumerate_ball(SUM, 3).elements)
        f = random_element(TH, pool, rng, 3)
        h = random_element(TH, pool, rng, 3)
        assert multiplicativity_defect(f, h, SUM, 3) <= 1e-12


class TestOperatorNorm:
    def test_diagonal_exact(self):
        D = dirac_matrix(SUM, B6)
        assert operator_norm(D) == float(max(B6.ball.lengths))

    def test_partial_permutation(self):
        M = regular_rep_matrix(FiniteSupportElement.delta(g(1, 0), TH), B4)
        assert operator_norm(M) == pytest.approx(1.0, abs=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 40))
    def test_against_svd(self, seed, n):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        ref = svd_norm(A)
        assert abs(operator_norm(A, tol=1e-10) - ref) <= 1e-10 * ref

    def test_clustered_spectrum(self):
        # nearly degenerate top singular values stress the stopping rule
        rng = np.random.default_rng(7)
        Q1, _ = np.linalg.qr(rng.normal(size=(60, 60)))
        Q2, _ = np.linalg.qr(rng.normal(size=(60, 60)))
        s = np.linspace(1, 0.01, 60)
        s[1] = 1 - 1e-6
        A = Q1 @ np.diag(s) @ Q2
        assert abs(operator_norm(A) - 1) <= 1e-10

    def test_zero_matrix(self):
        assert operator_norm(np.zeros((3, 3))) == 0.0


class TestCommutators:
    def test_unit_commutes(self):
        C = commutator_matrix(FiniteSupportElement.unit(TH), SUM, B4).entries
        assert not np.any(C)

    @pytest.mark.parametrize("x0", [g(1, 0), g(Fraction(1, 2), 1), g(-1, Fraction(3, 2)), g(2, 2)])
    def test_delta_exact(self, x0):
        L = float(length(SUM, x0))
        d = FiniteSupportElement.delta(x0, TH)
        assert commutator_norm(d, SUM, B6) == pytest.approx(L, abs=1e-8)
        assert higher_commutator_norm(d, 2, SUM, B6) == pytest.approx(L**2, abs=1e-8)
        assert L**2 <= (1 + L) ** 2

    def test_k1_is_commutator(self):
        f = random_element(TH, list(B4.elements), np.random.default_rng(0), 4)
        assert higher_commutator_norm(f, 1, SUM, B6) == commutator_norm(f, SUM, B6)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6))
    def test_bounds(self, seed):
        f = random_element(TH, list(B4.elements), np.random.default_rng(seed), 5)
        assert commutator_norm(f, SUM, B6) <= length_weighted_norm(f, SUM) + 1e-8
        for k in (1, 2, 3):
            assert higher_commutator_norm(f, k, SUM, B6) <= weighted_norm(f, k, SUM) + 1e-6

    def test_commutator_entries(self):
        f = FiniteSupportElement.delta(g(1, 0), TH, 0.5)
        C = commutator_matrix(f, SUM, B4).entries
        R = regular_rep_matrix(f, B4).entries
        L = B4.lengths
        assert np.allclose(C, (L[:, None] - L[None, :]) * R, atol=0)


class TestSummability:
    def test_bound_formula(self):
        # max{1, C-1} |B(1)| [1 + sum_{n>=1} r^(n-1)] with r = C / 2^t
        assert summability_bound(4, 1, 3) == pytest.approx(3 * (1 + 2))
        assert summability_bound(4, 1, 3, n_terms=2) == pytest.approx(3 * (1 + 1 + 0.5))
        assert summability_bound(1024**4, 1, 40) == math.inf

    def test_large_t(self):
        rep = summability_trace(SUM, 50, 4)
        S = rep.partial_traces
        assert all(b >= a for a, b in zip(S, S[1:]))
        assert math.isfinite(rep.bound_proved)
        assert all(s <= rep.bound_proved for s in S)
        assert rep.annulus_bound_holds()
        assert rep.ball_counts[0] == 1

    def test_counts_are_ball_sizes(self):
        rep = summability_trace(SUM, 5, 3)
        assert rep.ball_counts == [len(enumerate_ball(SUM, 2**n)) for n in range(4)]
        assert sum(rep.annulus_counts) == rep.ball_counts[-1]
        exact = math.fsum((1 + float(L) ** 2) ** -2.5 for L in enumerate_ball(SUM, 8).lengths)
        assert rep.partial_traces[-1] == pytest.approx(exact, rel=1e-13)

    def test_bad_t(self):
        with pytest.raises(ValueError):
            summability_trace(SUM, 0, 2)


class TestResolvent:
    def test_entries_and_norm(self):
        D = dirac_matrix(SUM, B4)
        lam = 2j
        Rm = resolvent_matrix(D, lam)
        assert Rm.entries[0, 0] == pytest.approx(1 / -lam)
        assert operator_norm(Rm) == pytest.approx(0.5, abs=1e-14)

    def test_real_lambda_rejected(self):
        with pytest.raises(DomainError):
            resolvent_matrix(dirac_matrix(SUM, B4), 1.0)

    def test_tail_bound(self):
        assert resolvent_tail_bound(4, 1.0) == pytest.approx(17**-0.5)


class TestMK:
    def test_same_state(self):
        d = FiniteSupportElement.delta(g(1, 1), TH)
        a = d + adjoint(d)
        assert mk_lower_bound(CanonicalTrace(), CanonicalTrace(), [a], SUM, B4) == 0

    def test_trace_equals_delta_e_state(self):
        rng = np.random.default_rng(5)
        cands = []
        for _ in range(5):
            f = random_element(TH, list(B4.elements), rng, 3)
            cands.append(f + adjoint(f))
        psi = VectorState({GroupElement.identity(2): 1.0})
        assert mk_lower_bound(CanonicalTrace(), psi, cands, SUM, B4) <= 1e-15

    def test_separating_candidate(self):
        x0 = g(1, 1)
        L = float(length(SUM, x0))
        d = FiniteSupportElement.delta(x0, TH)
        a = (d + adjoint(d)).scale(1 / (2 * L))
        psi = VectorState.normalized({GroupElement.identity(2): 1.0, x0: 1.0})
        assert mk_lower_bound(CanonicalTrace(), psi, [a], SUM, B4) == pytest.approx(1 / (2 * L), abs=1e-12)

    def test_non_self_adjoint_rejected(self):
        d = FiniteSupportElement.delta(g(1, 0), TH, 1j)
        with pytest.raises(DomainError):
            mk_lower_bound(CanonicalTrace(), CanonicalTrace(), [d], SUM, B4)

    def test_vector_state_needs_unit_vector(self):
        with pytest.raises(ValueError):
            VectorState({GroupElement.identity(2): 2.0})
