import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdh import (
    ContinuousStateSpace,
    FirFilter,
    InvalidInputError,
    assemble_ed,
    delay_chain,
    first_order_lowpass,
    hinf_norm,
    lift_error_system,
    psd_factor,
    split_delay,
    transfer_at,
)
from fdh.statespace import frequency_response
from tests.helpers import bbstar_by_quadrature, lifted_recursion_error, random_stable


class TestSplitDelay:
    def test_design_example(self):
        delay = split_delay(1.0, 5.5)
        assert (delay.m, delay.d) == (5, 0.5)

    def test_integer_delay(self):
        delay = split_delay(1.0, 3.0)
        assert (delay.m, delay.d) == (3, 0.0)

    def test_quarter_period(self):
        delay = split_delay(0.25, 0.6)
        assert delay.m == 2
        assert delay.d == pytest.approx(0.1, abs=1e-15)

    def test_floating_point_rollover(self):
        # 3 * 0.2 / 0.2 evaluates just below 3
        delay = split_delay(0.2, 3 * 0.2)
        assert (delay.m, delay.d) == (3, 0.0)

    @pytest.mark.parametrize("T, D", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.5), (1.0, math.nan)])
    def test_invalid(self, T, D):
        with pytest.raises(InvalidInputError):
            split_delay(T, D)

    @given(T=st.floats(1e-3, 10.0), D=st.floats(0.0, 100.0))
    def test_split_is_consistent(self, T, D):
        delay = split_delay(T, D)
        assert 0 <= delay.d < T
        assert delay.m * T + delay.d == pytest.approx(D, rel=1e-12, abs=1e-12 * T)


class TestDelayChain:
    def test_zero_is_identity(self):
        chain = delay_chain(0)
        assert chain.order == 0
        assert transfer_at(chain, 0.3 + 0.1j)[0, 0] == 1.0

    def test_single(self):
        chain = delay_chain(1)
        np.testing.assert_array_equal(chain.Ad, [[0.0]])
        np.testing.assert_array_equal(chain.Bd, [[1.0]])
        np.testing.assert_array_equal(chain.Cd, [[1.0]])

    def test_five_on_unit_circle(self):
        z = np.exp(1j * np.pi / 4)
        assert transfer_at(delay_chain(5), z)[0, 0] == pytest.approx(np.exp(-5j * np.pi / 4),
                                                                     abs=1e-14)

    def test_impulse_response(self):
        h = delay_chain(4).impulse_response(8)[:, 0, 0]
        np.testing.assert_array_equal(h, [0, 0, 0, 0, 1, 0, 0, 0])


class TestPsdFactor:
    def test_identity(self):
        F = psd_factor(np.eye(3))
        np.testing.assert_allclose(F @ F.T, np.eye(3), atol=1e-15)

    def test_rank_one(self):
        v = np.array([[3.0], [4.0]])
        F = psd_factor(v @ v.T)
        assert F.shape == (2, 1)
        np.testing.assert_allclose(np.abs(F), np.abs(v), rtol=1e-14)
        assert np.sign(F[0, 0]) == np.sign(F[1, 0])

    def test_design_example(self, design_example):
        lifted = design_example[2]
        F = psd_factor(lifted.BBstar)
        assert F.shape[1] == 2
        np.testing.assert_allclose(F @ F.T, lifted.BBstar, rtol=0, atol=1e-12)

    def test_indefinite(self):
        with pytest.raises(InvalidInputError, match=r"-1\.0"):
            psd_factor([[1.0, 0.0], [0.0, -1.0]])

    def test_asymmetric(self):
        with pytest.raises(InvalidInputError, match="symmetric"):
            psd_factor([[1.0, 0.5], [0.0, 1.0]])

    def test_zero(self):
        assert psd_factor(np.zeros((2, 2))).shape == (2, 0)

    def test_random_reconstruction(self, rng):
        # 100 random stable systems, nu <= 5
        for _ in range(100):
            nu = int(rng.integers(1, 6))
            A, B, C = random_stable(rng, nu)
            T = rng.uniform(0.1, 2.0)
            delay = split_delay(T, rng.uniform(0.0, 3 * T))
            lifted = lift_error_system(ContinuousStateSpace(A, B, C), delay)
            F = lifted.Bd_factor
            scale = np.linalg.norm(lifted.BBstar, 2)
            assert np.max(np.abs(F @ F.T - lifted.BBstar)) <= 1e-10 * scale


class TestLiftErrorSystem:
    def test_design_example_bbstar(self, design_example):
        BB = design_example[2].BBstar
        # analytic scalar gramian wc (1 - e^{-2 wc t}) / 2
        M = lambda t: 0.1 * -math.expm1(-0.2 * t) / 2  # noqa: E731
        np.testing.assert_allclose(BB, [[M(1.0), math.exp(-0.05) * M(0.5)],
                                        [math.exp(-0.05) * M(0.5), M(0.5)]], rtol=1e-13)
        # the tabulated off-diagonal 0.00452608 is e^{-0.05} * 0.00475813 rounded up;
        # the product itself is 0.0045260724
        np.testing.assert_allclose(BB, [[0.00906346, 0.00452607], [0.00452607, 0.00475813]],
                                   atol=5e-9)

    def test_integer_delay_collapses(self):
        sys = first_order_lowpass(0.1)
        lifted = lift_error_system(sys, split_delay(1.0, 5.0))
        M_T = lifted.BBstar[0, 0]
        np.testing.assert_allclose(lifted.BBstar, [[M_T, M_T], [M_T, M_T]], rtol=1e-14)
        assert lifted.Bd_factor.shape[1] == 1

    def test_structure(self, design_example):
        lifted = design_example[2]
        A_d = lifted.A_d
        assert A_d.shape == (7, 7)
        assert A_d[0, 0] == pytest.approx(math.exp(-0.1))
        assert A_d[1, 0] == pytest.approx(math.exp(-0.05))
        np.testing.assert_array_equal(A_d[2:, 1], [1, 0, 0, 0, 0])
        np.testing.assert_array_equal(A_d[2:, 2:], np.eye(5, k=-1))
        np.testing.assert_array_equal(lifted.C1, [[0, 0, 0, 0, 0, 0, 1]])
        np.testing.assert_array_equal(lifted.C2, [[1, 0, 0, 0, 0, 0, 0]])

    def test_spectrum(self, design_example):
        eig = np.sort(np.abs(np.linalg.eigvals(design_example[2].A_d)))
        np.testing.assert_allclose(eig[:6], 0.0, atol=1e-12)
        assert eig[6] == pytest.approx(math.exp(-0.1), rel=1e-14)

    def test_spectrum_random(self, rng):
        A, B, C = random_stable(rng, 3)
        delay = split_delay(0.7, 2.3)
        lifted = lift_error_system(ContinuousStateSpace(A, B, C), delay)
        got = np.sort_complex(np.linalg.eigvals(lifted.A_d))
        want = np.sort_complex(np.concatenate([np.exp(0.7 * np.linalg.eigvals(A)),
                                               np.zeros(1 + delay.m)]))
        np.testing.assert_allclose(got, want, atol=1e-7)

    def test_no_delay_layout(self):
        lifted = lift_error_system(first_order_lowpass(1.0), split_delay(1.0, 0.3))
        assert lifted.order == 2
        np.testing.assert_array_equal(lifted.C1, [[0.0, 1.0]])
        np.testing.assert_array_equal(lifted.C2, [[1.0, 0.0]])

    def test_quadrature_cross_check(self, rng):
        for _ in range(10):
            nu = int(rng.integers(1, 6))
            A, B, C = random_stable(rng, nu)
            T = rng.uniform(0.1, 2.0)
            delay = split_delay(T, rng.uniform(0.0, 4 * T))
            lifted = lift_error_system(ContinuousStateSpace(A, B, C), delay)
            quad = bbstar_by_quadrature(A, B, C, T, delay.d)
            err = np.linalg.norm(lifted.BBstar - quad) / np.linalg.norm(quad)
            assert err <= 1e-8

    def test_json(self, design_example):
        data = design_example[2].to_dict()
        assert data["delay"] == {"T": 1.0, "D": 5.5, "m": 5, "d": 0.5}
        assert len(data["A_d"]) == 7


class TestAssembleEd:
    def test_zero_filter_is_ideal_branch(self, design_example):
        lifted = design_example[2]
        Ed = assemble_ed(lifted, FirFilter([0.0]))
        z = np.exp(1j * np.linspace(0.01, np.pi, 50))
        got = frequency_response(Ed, z)[:, 0, :]
        X = np.linalg.solve(z[:, None, None] * np.eye(7) - lifted.A_d,
                            np.broadcast_to(lifted.input_matrix, (50, 7, 2)))
        np.testing.assert_allclose(got, (lifted.C1 @ X)[:, 0, :], atol=1e-14)

    def test_direct_formula(self, design_example):
        lifted, filt = design_example[2], FirFilter([0.1, -0.3, 0.2, 0.7, 0.05])
        Ed = assemble_ed(lifted, filt)
        for theta in (0.0, 0.4, 2.0, np.pi):
            z = np.exp(1j * theta)
            row = (lifted.C1 - filt.transfer(z) * lifted.C2) @ np.linalg.inv(
                z * np.eye(7) - lifted.A_d)
            np.testing.assert_allclose(transfer_at(Ed, z), row @ lifted.input_matrix,
                                       atol=1e-14)

    def test_integer_delay_exact(self):
        delay = split_delay(1.0, 4.0)
        lifted = lift_error_system(first_order_lowpass(0.3), delay)
        Ed = assemble_ed(lifted, FirFilter(np.eye(6)[4]))
        z = np.exp(1j * np.linspace(0.0, np.pi, 200))
        assert np.max(np.abs(frequency_response(Ed, z))) <= 1e-10

    def test_dimensions(self, design_example):
        lifted = design_example[2]
        Ed = assemble_ed(lifted, FirFilter(np.ones(12)))
        assert Ed.order == 7 + 11
        assert Ed.shape == (1, 2)


def test_lifted_recursion_matches_ode(rng):
    A, B, C = random_stable(rng, 3)
    assert lifted_recursion_error(ContinuousStateSpace(A, B, C), 0.8, 2.5, 40, rng) <= 1e-6


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_similarity_invariance(seed):
    rng = np.random.default_rng(seed)
    A, B, C = random_stable(rng, 3)
    sys = ContinuousStateSpace(A, B, C)
    S = rng.normal(size=(3, 3)) + 3 * np.eye(3)
    delay = split_delay(1.0, 2.4)
    filt = FirFilter(rng.normal(size=4))
    ref = hinf_norm(lift_error_system(sys, delay), filt, 512).hinf_norm
    got = hinf_norm(lift_error_system(sys.similarity(S), delay), filt, 512).hinf_norm
    assert got == pytest.approx(ref, rel=1e-8)
