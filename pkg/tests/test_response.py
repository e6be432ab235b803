import math

import numpy as np
import pytest

from bkchain import (
    ChainSpec,
    channel_gains,
    end_to_end_gain_map,
    nonreciprocity_report,
    resonant_susceptibility_oracle,
    susceptibility,
)
from bkchain.chain import bloch_matrix
from bkchain.errors import ResonanceSingularityError
from bkchain.response import ep_susceptibility_matrix, quadrature_labels


class TestSusceptibility:
    def test_single_site_magnitude(self):
        gamma = 2.0
        chi = susceptibility(ChainSpec(1, 0.0, 0.0, gamma), 0.0)
        # drive normalization: |x| = 2 f_x / gamma for an uncoupled resonator
        assert np.abs(np.abs(chi.matrix) - (2 / gamma) * np.eye(2)).max() < 1e-14
        # signed convention carries the -2/gamma prefactor
        assert chi.matrix[0, 0] == pytest.approx(-2 / gamma)

    def test_inverse_contract(self, rng):
        spec = ChainSpec.common_phase(4, 0.4, 0.3, 1.1, 1.0)
        omega = 0.37
        chi = susceptibility(spec, omega)
        from bkchain import build_dynamical_matrix

        m = build_dynamical_matrix(spec).matrix
        resid = chi.matrix @ (1j * omega * np.eye(8) + m) - np.eye(8)
        assert np.abs(resid).max() < 1e-10

    def test_block_diagonal_at_pi_half(self):
        chi = susceptibility(ChainSpec.ep_family(4, 1.5, 1.0), 0.0)
        norm = np.abs(chi.matrix).max()
        assert np.abs(chi.block("x", "p")).max() <= 1e-12 * norm
        assert np.abs(chi.block("p", "x")).max() <= 1e-12 * norm

    def test_triangular_gain_powers(self):
        # |chi| reproduces the per-link-gain power law entrywise
        gamma, n = 1.0, 4
        for gain in (0.75, 1.37, 2.0):
            chi = susceptibility(ChainSpec.ep_family(n, gain, gamma), 0.0)
            xx = np.abs(chi.block("x", "x"))
            pp = np.abs(chi.block("p", "p"))
            for j in range(n):
                for k in range(n):
                    expect_xx = (2 / gamma) * gain ** (j - k) if j >= k else 0.0
                    expect_pp = (2 / gamma) * gain ** (k - j) if k >= j else 0.0
                    assert xx[j, k] == pytest.approx(expect_xx, abs=1e-10)
                    assert pp[j, k] == pytest.approx(expect_pp, abs=1e-10)

    def test_g075_end_to_end_value(self):
        gamma = 1.0
        chi = susceptibility(ChainSpec.ep_family(4, 0.75, gamma), 0.0)
        value = abs(chi.element(("x", 0), ("x", 3)))
        assert value == pytest.approx((2 / gamma) * 0.421875, rel=1e-10)

    def test_resonance_singularity(self):
        # undamped uncoupled site probed at its (zero-frequency) resonance
        with pytest.raises(ResonanceSingularityError):
            susceptibility(ChainSpec(1, 0.0, 0.0, 0.0), 0.0)

    def test_labels(self):
        assert quadrature_labels(2) == ["x1", "x2", "p1", "p2"]


class TestOracle:
    def test_zero_gain_identity(self):
        gamma = 2.0
        m = ep_susceptibility_matrix(4, 0.0, gamma)
        assert np.abs(m + (2 / gamma) * np.eye(8)).max() < 1e-15

    def test_two_site_unit_gain(self):
        gamma = 1.0
        m = ep_susceptibility_matrix(2, 1.0, gamma)
        expect_xx = np.array([[1.0, 0.0], [1.0, 1.0]])
        assert np.abs(m[:2, :2] - (-2 / gamma) * expect_xx).max() < 1e-15
        expect_pp = np.array([[1.0, -1.0], [0.0, 1.0]])
        assert np.abs(m[2:, 2:] - (-2 / gamma) * expect_pp).max() < 1e-15

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 8])
    @pytest.mark.parametrize("gain", [0.5, 0.75, 1.37, 2.0, 4.0])
    def test_matches_generic_inversion(self, n, gain):
        gamma = 1.3
        spec = ChainSpec.ep_family(n, gain, gamma)
        direct = susceptibility(spec, 0.0).matrix
        oracle = resonant_susceptibility_oracle(spec).matrix
        scale = np.abs(oracle).max()
        assert np.abs(direct - oracle).max() <= 1e-10 * scale

    def test_rejects_outside_family(self):
        with pytest.raises(ValueError):
            resonant_susceptibility_oracle(ChainSpec(2, 1.0, 1.0, 1.0))  # phi = 0
        with pytest.raises(ValueError):
            resonant_susceptibility_oracle(ChainSpec.ep_family(4, 1.0, 1.0, boundary="periodic"))


class TestChannelGains:
    def test_uncoupled_all_equal(self):
        gamma = 1.0
        gains = channel_gains(susceptibility(ChainSpec(4, 0.0, 0.0, gamma), 0.0))
        assert np.abs(gains.singular_values - 2 / gamma).max() < 1e-12

    def test_pairing_of_top_singular_values(self):
        gains = channel_gains(susceptibility(ChainSpec.ep_family(4, 1.37, 1.0), 0.0))
        s = gains.singular_values
        assert (s[0] - s[1]) / s[0] < 1e-9

    def test_two_channel_separation_grows(self):
        previous_top, previous_ratio = 0.0, 0.0
        for gain in (0.5, 1.0, 1.5, 2.0, 3.0):
            gains = channel_gains(susceptibility(ChainSpec.ep_family(4, gain, 1.0), 0.0))
            assert gains.singular_values[0] > previous_top
            assert gains.two_channel_ratio > previous_ratio
            previous_top = gains.singular_values[0]
            previous_ratio = gains.two_channel_ratio


class TestGainMap:
    def test_balanced_point_value(self):
        # J/gamma = 5/16, lam/J = 1, phi = pi/2: G = 1.25, gain = (2/gamma) G^3
        gamma = 1.0
        base = ChainSpec.common_phase(4, (5 / 16) * gamma, (5 / 16) * gamma, math.pi / 2, gamma)
        result = end_to_end_gain_map(base, [math.pi / 2], [1.0])
        assert result.gain[0, 0] == pytest.approx((2 / gamma) * 1.25**3, rel=1e-10)
        assert result.labels[0, 0] == "nontrivial-winding"

    def test_no_amplification_without_squeezing(self):
        gamma = 1.0
        base = ChainSpec.common_phase(4, (5 / 16) * gamma, 0.0, math.pi / 2, gamma)
        result = end_to_end_gain_map(base, np.linspace(0.3, 2.8, 5), [0.0])
        assert np.all(result.gain <= 2 / gamma + 1e-12)

    def test_real_couplings_confined(self):
        gamma = 1.0
        base = ChainSpec.common_phase(4, (5 / 16) * gamma, (5 / 16) * gamma, 0.0, gamma)
        result = end_to_end_gain_map(base, [0.0], [1.0])
        assert result.gain[0, 0] <= 1e-12 * (2 / gamma)

    def test_unstable_points_carry_label_and_nan(self):
        gamma = 1.0
        base = ChainSpec.common_phase(4, 1.0, 1.0, math.pi / 2, gamma)
        result = end_to_end_gain_map(base, [math.pi / 2], [3.0])  # far above OBC onset
        assert math.isnan(result.gain[0, 0])
        assert result.labels[0, 0] == "obc-unstable"

    def test_parallel_matches_serial(self):
        gamma = 1.0
        base = ChainSpec.common_phase(4, (5 / 16) * gamma, (5 / 16) * gamma, math.pi / 2, gamma)
        phi = np.linspace(0.1, 3.0, 4)
        ratio = np.linspace(0.1, 1.9, 4)
        serial = end_to_end_gain_map(base, phi, ratio, threads=1)
        parallel = end_to_end_gain_map(base, phi, ratio, threads=3)
        assert np.array_equal(serial.gain, parallel.gain, equal_nan=True)
        assert np.array_equal(serial.labels, parallel.labels)


class TestNonreciprocity:
    def test_open_chain_pattern(self):
        gamma = 1.0
        spec = ChainSpec(4, 0.3, 0.3, gamma)  # phi = 0, |J| = |lam|
        rep = nonreciprocity_report(spec)
        assert rep.forward_neighbor_magnitude > 0
        assert rep.max_reverse_transmission <= 1e-12 * rep.norm
        assert rep.max_beyond_neighbor <= 1e-12 * rep.norm
        assert rep.boundary_independent
        # each neighbour response has magnitude (2/gamma) G
        chi = susceptibility(spec, 0.0)
        assert abs(chi.element(("x", 1), ("p", 0)))== pytest.approx((2 / gamma) * spec.gain, rel=1e-12)
        assert abs(chi.element(("x", 1), ("p", 2)))== pytest.approx((2 / gamma) * spec.gain, rel=1e-12)
        assert abs(chi.element(("p", 1), ("x", 0))) <= 1e-12 * rep.norm

    def test_boundary_independence(self):
        gamma = 1.0
        ring = ChainSpec(4, 0.3, 0.3, gamma, boundary="periodic")
        rep = nonreciprocity_report(ring)
        assert rep.forward_neighbor_magnitude == pytest.approx((2 / gamma) * ring.gain, rel=1e-12)
        assert rep.max_reverse_transmission <= 1e-12 * rep.norm
        assert rep.max_beyond_neighbor <= 1e-12 * rep.norm

    def test_trivial_when_uncoupled(self):
        rep = nonreciprocity_report(ChainSpec(3, 0.0, 0.0, 1.0))
        assert rep.trivially_reciprocal

    def test_requires_real_balanced(self):
        with pytest.raises(ValueError):
            nonreciprocity_report(ChainSpec.ep_family(4, 1.0, 1.0))


class TestStructuralInvariants:
    def test_chirality_at_balance(self):
        gamma, gain, n = 1.0, 1.37, 5
        chi = susceptibility(ChainSpec.ep_family(n, gain, gamma), 0.0)
        norm = np.abs(chi.matrix).max()
        for j in range(n - 1):
            assert abs(chi.element(("x", j), ("x", j + 1))) == pytest.approx(
                gain * 2 / gamma, rel=1e-12)
            assert abs(chi.element(("p", j + 1), ("p", j))) == pytest.approx(
                gain * 2 / gamma, rel=1e-12)
            assert abs(chi.element(("x", j + 1), ("x", j))) <= 1e-12 * norm

    def test_parity_of_magnitudes(self):
        # reversing site order and swapping x<->p maps |chi| onto itself
        n = 4
        chi = np.abs(susceptibility(ChainSpec.ep_family(n, 1.37, 1.0), 0.0).matrix)
        rev = np.eye(n)[::-1]
        zero = np.zeros((n, n))
        pi_op = np.block([[zero, rev], [rev, zero]])
        assert np.abs(pi_op @ chi @ pi_op - chi).max() < 1e-10

    def test_pbc_block_fourier_consistency(self):
        # chi(0) of the ring diagonalizes per k into (i*0 + Bloch)^-1
        n = 6
        spec = ChainSpec.common_phase(n, 0.3, 0.2, 0.9, 1.0, boundary="periodic")
        chi = susceptibility(spec, 0.0).matrix
        from bkchain.chain import quadrature_to_mode_basis

        chi_modes = quadrature_to_mode_basis(chi)
        f = np.exp(2j * math.pi * np.outer(np.arange(n), np.arange(n)) / n) / math.sqrt(n)
        for m in range(n):
            k = 2 * math.pi * m / n
            v = f[:, m]
            big = np.zeros((2 * n, 2), dtype=complex)
            big[:n, 0] = v
            big[n:, 1] = v
            block = big.conj().T @ chi_modes @ big
            # conjugate-transpose extraction evaluates the symbol at -k;
            # the dynamical Bloch generator in the (a, a*) basis is -i B(k)
            expect = np.linalg.inv(-1j * bloch_matrix(spec, -k))
            assert np.abs(block - expect).max() < 1e-10
