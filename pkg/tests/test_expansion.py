"""Hermite polynomials, partition sets, Edgeworth coefficients, operator
terms, boundary behavior and the Fourier-domain convention check."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import edgeworth_markov as em
from edgeworth_markov.errors import ComplexResidue
from edgeworth_markov.expansion import (
    build_approx,
    normal_cdf,
    normal_pdf,
    operator_A_transform_numeric,
    operator_A_transform_theory,
)

from conftest import make_chain_c_symmetric

PARTITION_COUNTS = {1: 1, 2: 2, 3: 3, 4: 5, 5: 7, 6: 11, 7: 15, 8: 22}


class TestHermite:
    def test_low_orders(self):
        assert em.hermite(2, 1.0) == pytest.approx(0.0)
        assert em.hermite(3, 2.0) == pytest.approx(2.0)  # z^3 - 3z at 2
        assert em.hermite(0, 5.0) == 1.0
        assert em.hermite(1, -0.3) == pytest.approx(-0.3)

    def test_recurrence_on_grid(self):
        z = np.linspace(-3, 3, 41)
        for n in range(1, 8):
            lhs = em.hermite(n + 1, z)
            rhs = z * em.hermite(n, z) - n * em.hermite(n - 1, z)
            assert np.abs(lhs - rhs).max() < 1e-10

    @pytest.mark.parametrize("z0", [-2.0, 0.0, 1.5])
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_gaussian_derivative_identity(self, n, z0):
        # n(z) He_n(z) = (-1)^n d^n/dz^n n(z); central differences with one
        # Richardson step to push the stencil error below the tolerance
        stencils = {
            1: (np.array([-1, 0, 1]), np.array([-0.5, 0.0, 0.5])),
            2: (np.array([-1, 0, 1]), np.array([1.0, -2.0, 1.0])),
            3: (np.array([-2, -1, 1, 2]), np.array([-0.5, 1.0, -1.0, 0.5])),
            4: (np.array([-2, -1, 0, 1, 2]), np.array([1.0, -4.0, 6.0, -4.0, 1.0])),
        }
        offs, coef = stencils[n]

        def deriv(h):
            return coef @ normal_pdf(z0 + offs * h) / h**n

        d = (4.0 * deriv(5e-3) - deriv(1e-2)) / 3.0
        assert (-1) ** n * d == pytest.approx(
            normal_pdf(z0) * em.hermite(n, z0), abs=1e-6)


class TestPartitions:
    def test_m1(self):
        assert em.partitions(1).tuples == ((1,),)

    def test_m3(self):
        assert set(em.partitions(3).tuples) == {(3, 0, 0), (1, 1, 0), (0, 0, 1)}

    @pytest.mark.parametrize("m,count", sorted(PARTITION_COUNTS.items()))
    def test_counts_match_partition_numbers(self, m, count):
        assert len(em.partitions(m).tuples) == count

    @given(st.integers(1, 10))
    @settings(max_examples=20, deadline=None)
    def test_constraint_holds_exactly(self, m):
        ps = em.partitions(m)
        for tup in ps.tuples:
            assert len(tup) == m
            assert sum((i + 1) * k for i, k in enumerate(tup)) == m
            assert all(k >= 0 for k in tup)
        assert len(set(ps.tuples)) == len(ps.tuples)
        assert list(ps.tuples) == sorted(ps.tuples)

    def test_empty_order_constant_one(self):
        assert em.partitions(0).tuples == ((),)


class TestFreqPoly:
    def test_order_zero_is_one(self, summary_a):
        _, _, summ = summary_a
        assert em.freq_poly(0, 0.7j, summ.cumulants_gamma, summ.sigma) == 1.0

    def test_order_one(self, summary_a):
        _, _, summ = summary_a
        it = 0.5j
        expect = summ.cumulants_gamma[3] * it**3 / (6 * summ.sigma**3)
        assert em.freq_poly(1, it, summ.cumulants_gamma, summ.sigma) == pytest.approx(expect)

    def test_order_two(self, summary_a):
        _, _, summ = summary_a
        g, s = summ.cumulants_gamma, summ.sigma
        it = 1.3j
        expect = g[4] * it**4 / (24 * s**4) + g[3] ** 2 * it**6 / (72 * s**6)
        assert em.freq_poly(2, it, g, s) == pytest.approx(expect)


class TestCoeffA:
    def test_first_order_skew_coefficient(self, summary_a):
        _, _, summ = summary_a
        g, s = summ.cumulants_gamma, summ.sigma
        for z in (-1.7, 0.0, 0.4, 2.2):
            expect = normal_pdf(z) * g[3] / (6 * s**3) * (1 - z * z)
            assert em.coeff_a(0, 1, z, g, s) == pytest.approx(expect, abs=1e-15)

    def test_first_order_projector_coefficient(self, summary_a):
        _, _, summ = summary_a
        for z in (-0.9, 0.3):
            assert em.coeff_a(1, 1, z, summ.cumulants_gamma, summ.sigma) == pytest.approx(
                -normal_pdf(z) / summ.sigma, abs=1e-15)

    def test_gaussian_decay(self, summary_a):
        _, _, summ = summary_a
        for j in range(3):
            for nu in range(max(j, 1), 3):
                assert abs(em.coeff_a(j, nu, 12.0, summ.cumulants_gamma, summ.sigma)) < 1e-9
                assert abs(em.coeff_a(j, nu, -12.0, summ.cumulants_gamma, summ.sigma)) < 1e-9


class TestOperatorA:
    def test_order_zero_at_origin(self, summary_a):
        _, _, summ = summary_a
        A0 = em.operator_A(0, 0.0, summ.proj_derivs, summ.cumulants_gamma, summ.sigma)
        assert np.abs(A0 - 0.5 * summ.proj_derivs[0]).max() < 1e-15

    def test_first_order_matches_paper_matrix(self, summary_b):
        spec, ss, summ = summary_b
        g, s = summ.cumulants_gamma, summ.sigma
        P1 = spec.P * spec.f[None, :]
        op = ss.Pi @ P1 @ ss.E + ss.E @ P1 @ ss.Pi
        for z in (-1.3, 0.0, 0.8):
            A1 = em.operator_A(1, z, summ.proj_derivs, g, s)
            expect = normal_pdf(z) * (g[3] / (6 * s**3) * (1 - z * z) * ss.Pi - op / s)
            assert np.abs(A1 - expect).max() < 1e-8

    def test_rank_one_symmetric_observable(self):
        # gamma_3 = 0 kills the Pi part; E = I - Pi collapses the rest
        spec = make_chain_c_symmetric()
        ss = em.stationary(spec)
        summ = em.spectral_summary(spec, ss, k=4)
        P1 = spec.P * spec.f[None, :]
        eye = np.eye(4)
        z = 0.6
        A1 = em.operator_A(1, z, summ.proj_derivs, summ.cumulants_gamma, summ.sigma)
        expect = -normal_pdf(z) / summ.sigma * (
            ss.Pi @ P1 @ (eye - ss.Pi) + (eye - ss.Pi) @ P1 @ ss.Pi)
        assert np.abs(A1 - expect).max() < 1e-10

    def test_complex_residue_rejected(self, summary_a):
        _, _, summ = summary_a
        bad = [summ.proj_derivs[0].astype(complex) + 1e-6j, summ.proj_derivs[1]]
        with pytest.raises(ComplexResidue):
            em.operator_A(1, 0.5, bad, summ.cumulants_gamma, summ.sigma)

    def test_first_order_envelope_bound(self, summary_b):
        # entries stay under the n-weighted polynomial envelope
        _, ss, summ = summary_b
        g3, s = summ.cumulants_gamma[3], summ.sigma
        zs = np.linspace(-6, 6, 481)
        sup_skew = (normal_pdf(zs) * np.abs(1 - zs**2)).max()
        envelope = (abs(g3) / (6 * s**3) * sup_skew * np.abs(summ.proj_derivs[0])
                    + normal_pdf(0.0) / s * np.abs(summ.proj_derivs[1]))
        observed = np.max(np.abs(np.stack(
            [em.operator_A(1, z, summ.proj_derivs, summ.cumulants_gamma, s)
             for z in zs])), axis=0)
        assert np.all(observed <= envelope + 1e-12)


class TestEdgeworthCdf:
    def test_order_zero_is_gaussian_times_projection(self, summary_a):
        spec, ss, summ = summary_a
        for z in (-1.0, 0.3):
            out = em.edgeworth_cdf(spec, ss, summ, 30, 0, z)
            assert np.abs(out - normal_cdf(z) * summ.proj_derivs[0]).max() < 1e-14

    def test_skew_term_vanishes_at_unit_z(self, summary_a):
        # 1 - z^2 = 0 at z = 1: only the projector-derivative part remains
        spec, ss, summ = summary_a
        n = 50
        out = em.edgeworth_cdf(spec, ss, summ, n, 1, 1.0)
        P1op = summ.proj_derivs[1]
        expect = (normal_cdf(1.0) * summ.proj_derivs[0]
                  - normal_pdf(1.0) / summ.sigma * P1op / math.sqrt(n))
        assert np.abs(out - expect).max() < 1e-12

    def test_pi_mixed_reduction_to_scalar(self, summary_a):
        spec, ss, summ = summary_a
        n = 50
        for z in np.linspace(-6, 6, 49):
            mat = em.edgeworth_cdf(spec, ss, summ, n, 1, z)
            mixed = float(ss.pi @ mat @ np.ones(spec.d))
            assert mixed == pytest.approx(float(em.scalar_expansion(summ, n, z)), abs=1e-12)

    def test_boundary_limits(self, summary_b):
        _, _, summ = summary_b
        ap = build_approx(summ, 25, 2)
        assert np.abs(ap.evaluate(12.0) - summ.proj_derivs[0]).max() < 1e-9
        assert np.abs(ap.evaluate(-12.0)).max() < 1e-9

    def test_term_zero_exact_form(self, summary_a):
        _, _, summ = summary_a
        ap = build_approx(summ, 9, 1)
        z = 0.37
        assert np.array_equal(ap.term(0, z), normal_cdf(z) * summ.proj_derivs[0])

    def test_order_zero_monotone_in_z(self, summary_b):
        _, _, summ = summary_b
        ap = build_approx(summ, 16, 0)
        zs = np.linspace(-6, 6, 121)
        vals = np.stack([ap.evaluate(z) for z in zs])
        assert np.all(np.diff(vals, axis=0) >= -1e-15)

    def test_coeff_values_consistent_with_term(self, summary_b):
        _, _, summ = summary_b
        ap = build_approx(summ, 12, 2)
        zs = np.array([-0.8, 0.1, 1.9])
        for m in range(3):
            coefs = ap.coeff_values(m, zs)
            for iz, z in enumerate(zs):
                direct = ap.term(m, z)
                combo = 12 ** (-m / 2.0) * sum(
                    coefs[j, iz] * ap.proj_derivs[j] for j in range(m + 1))
                assert np.abs(direct - combo).max() < 1e-14


class TestScalarExpansion:
    def test_at_origin(self, summary_a):
        _, _, summ = summary_a
        g3, s = summ.cumulants_gamma[3], summ.sigma
        n = 40
        expect = 0.5 + normal_pdf(0.0) * g3 / (6 * s**3) / math.sqrt(n)
        assert em.scalar_expansion(summ, n, 0.0) == pytest.approx(expect, abs=1e-15)

    def test_correction_vanishes_at_unit_z(self, summary_a):
        _, _, summ = summary_a
        for z in (1.0, -1.0):
            assert em.scalar_expansion(summ, 7, z) == pytest.approx(
                float(normal_cdf(z)), abs=1e-15)

    def test_zero_skew_reduces_to_gaussian(self):
        spec = make_chain_c_symmetric()
        ss = em.stationary(spec)
        summ = em.spectral_summary(spec, ss, k=4)
        zs = np.linspace(-4, 4, 17)
        assert np.abs(em.scalar_expansion(summ, 11, zs) - normal_cdf(zs)).max() < 1e-12


class TestFourierConsistency:
    @pytest.mark.parametrize("theta", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("m", [0, 1, 2])
    def test_transform_matches_frequency_form(self, summary_a, m, theta):
        _, _, summ = summary_a
        num = operator_A_transform_numeric(m, theta, summ)
        theo = operator_A_transform_theory(m, theta, summ)
        assert np.abs(num - theo).max() < 1e-6
