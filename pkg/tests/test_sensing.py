import math

import numpy as np
import pytest

from bkchain import (
    ChainSpec,
    responsivity,
    scaling_sweep,
    sensing_report,
    sensing_susceptibility,
)
from bkchain.sensing import responsivity_closed_form, responsivity_ep


class TestSensingSusceptibility:
    def test_no_detuning_no_signal(self):
        spec = ChainSpec.ep_family(4, 1.37, 1.0)
        r = sensing_susceptibility(spec, 0.0)
        assert r.forward == 0.0
        assert r.reverse == 0.0

    def test_single_site_slope(self):
        gamma = 1.0
        spec = ChainSpec.ep_family(1, 0.0, gamma)
        h = 1e-7
        slope = (sensing_susceptibility(spec, h).forward
                 - sensing_susceptibility(spec, -h).forward) / (2 * h)
        assert abs(slope) == pytest.approx((2 / gamma) ** 2, rel=1e-6)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_dual_path_agreement(self, n):
        gamma = 1.0
        spec = ChainSpec.ep_family(n, 1.37, gamma)
        for eps in np.linspace(-0.5 * gamma, 0.5 * gamma, 11):
            if eps == 0.0:
                continue
            r = sensing_susceptibility(spec, float(eps))
            assert abs(r.forward - r.forward_closed_form) <= 1e-9 * abs(r.forward)

    def test_dual_path_off_balance(self):
        # the rank-one expression stays exact at any |lam| != |J| (phi = pi/2)
        gamma = 1.0
        spec = ChainSpec(4, 0.2j, 0.16j, gamma)
        for eps in (0.3, -0.11):
            r = sensing_susceptibility(spec, eps)
            assert abs(r.forward - r.forward_closed_form) <= 1e-12 * max(abs(r.forward), 1e-30)

    def test_odd_in_epsilon(self):
        spec = ChainSpec.ep_family(4, 1.37, 1.0)
        for eps in (0.05, 0.2, 0.45):
            plus = sensing_susceptibility(spec, eps).forward
            minus = sensing_susceptibility(spec, -eps).forward
            assert plus == pytest.approx(-minus, rel=1e-12)

    def test_reverse_transmission_zero_on_balanced_family(self):
        spec = ChainSpec.ep_family(4, 1.37, 1.0)
        for eps in (0.1, 0.4):
            r = sensing_susceptibility(spec, eps)
            norm = np.abs(r.matrix).max()
            assert abs(r.reverse) <= 1e-12 * norm

    def test_reverse_transmission_decays_exponentially_off_balance(self):
        # |lam| = 0.8 |J|: the reverse element shrinks as e^{-alpha N}
        gamma = 1.0
        j_mag = 0.2
        eps = 0.1 * gamma
        values = []
        for n in range(2, 9):
            spec = ChainSpec(n, 1j * j_mag, 0.8j * j_mag, gamma)
            values.append(abs(sensing_susceptibility(spec, eps).reverse))
        slope = np.polyfit(np.arange(2, 9), np.log(values), 1)[0]
        assert slope < -0.5  # fitted decay rate alpha > 0

    def test_cannot_destabilize_on_balanced_family(self):
        # the detuning rotates eigenvalues into +-i eps pairs but every real
        # part stays pinned at -gamma/2: the sensor cannot go unstable
        from bkchain import build_dynamical_matrix

        gamma = 1.0
        for eps in (0.1, 0.4, 2.0):
            spec = ChainSpec.ep_family(5, 2.0, gamma).with_detuning(4, eps * gamma)
            evals = np.linalg.eigvals(build_dynamical_matrix(spec).matrix)
            assert np.abs(evals.real + gamma / 2).max() < 1e-9

    def test_general_site_extension(self):
        spec = ChainSpec.ep_family(4, 1.2, 1.0)
        r = sensing_susceptibility(spec, 0.2, site=2)
        assert abs(r.forward - r.forward_closed_form) <= 1e-10 * max(abs(r.forward), 1e-30)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            sensing_susceptibility(ChainSpec(4, 0.3, 0.3, 1.0), 0.1)  # phi = 0
        with pytest.raises(ValueError):
            sensing_susceptibility(ChainSpec.ep_family(4, 1.0, 1.0, boundary="periodic"), 0.1)


class TestResponsivity:
    def test_single_site(self):
        gamma = 2.0
        assert responsivity(ChainSpec.ep_family(1, 0.0, gamma)) == pytest.approx(
            4 / gamma, rel=1e-9)

    def test_balanced_closed_form(self):
        gamma = 1.0
        for n, gain in ((2, 0.5), (4, 1.37), (5, 2.0)):
            spec = ChainSpec.ep_family(n, gain, gamma)
            r_fd = responsivity(spec)
            assert r_fd == pytest.approx(responsivity_ep(n, gain, gamma), rel=1e-6)
            assert r_fd == pytest.approx(responsivity_closed_form(spec), rel=1e-6)

    def test_paper_operating_point(self):
        gamma = 1.0
        r = responsivity(ChainSpec.ep_family(4, 1.37, gamma))
        assert r == pytest.approx(4 * 1.37**6 / gamma, rel=1e-6)
        assert r == pytest.approx(26.4474, rel=1e-4)

    def test_attenuation_below_unit_gain(self):
        gamma = 1.0
        r4 = responsivity(ChainSpec.ep_family(4, 0.5, gamma))
        r5 = responsivity(ChainSpec.ep_family(5, 0.5, gamma))
        assert r5 / r4 == pytest.approx(0.25, rel=1e-6)


class TestScalingSweep:
    def test_amplifying_slope(self):
        sweep = scaling_sweep(1.37, 1.0, range(1, 6))
        assert sweep.log_slope == pytest.approx(2 * math.log(1.37), abs=1e-3)

    def test_flat_at_unit_gain(self):
        sweep = scaling_sweep(1.0, 1.0, range(1, 6))
        assert abs(sweep.log_slope) < 1e-3

    def test_attenuating_slope(self):
        sweep = scaling_sweep(0.5, 1.0, range(1, 6))
        assert sweep.log_slope == pytest.approx(2 * math.log(0.5), abs=1e-3)
        assert sweep.log_slope == pytest.approx(-1.3862943611, abs=1e-3)

    def test_growth_iff_nontrivial_winding(self):
        # responsivity grows with N exactly in the nontrivial phase
        from bkchain import winding_numbers

        gamma = 1.0
        for gain in (0.6, 0.9, 1.1, 1.5):
            spec = ChainSpec.ep_family(4, gain, gamma)
            nu = winding_numbers(spec)
            sweep = scaling_sweep(gain, gamma, range(2, 6))
            if nu[0] != 0:
                assert sweep.log_slope > 0
            else:
                assert sweep.log_slope < 0


class TestSensingReport:
    def test_report_contents(self):
        gamma = 1.0
        spec = ChainSpec.ep_family(3, 1.37, gamma)
        eps = np.linspace(-0.5, 0.5, 21)
        rep = sensing_report(spec, eps)
        assert rep.gain == pytest.approx(1.37)
        assert rep.n_sites == 3
        assert np.abs(rep.forward - rep.forward_closed_form).max() <= 1e-9 * np.abs(rep.forward).max()
        # odd in eps across the grid
        assert np.abs(rep.forward + rep.forward[::-1]).max() < 1e-10 * np.abs(rep.forward).max()
