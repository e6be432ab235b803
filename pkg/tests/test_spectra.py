import math

import numpy as np
import pytest

from bkchain import (
    ChainSpec,
    bloch_bands,
    build_dynamical_matrix,
    classify_phase,
    obc_instability_threshold,
    obc_stability_report,
    parity_symmetry_residual,
    winding_numbers,
)
from bkchain.chain import bloch_matrix
from bkchain.errors import BandTrackingError, PhaseBoundaryError
from bkchain.spectra import (
    NONTRIVIAL_WINDING,
    OBC_UNSTABLE,
    POINT_GAP_CLOSED,
    POINT_GAP_OPEN_TRIVIAL,
    find_obc_instability_ratio,
    find_pbc_instability_gain,
    gauge_mapped_spec,
    growth_rate,
    obc_instability_threshold_printed,
    pbc_growth_rate_bloch,
    real_space_parity_residual,
    stability_report,
    track_bands_numeric,
)

from conftest import random_common_phase_spec


class TestBlochBands:
    def test_balanced_imaginary_couplings(self):
        # with |J| = |lam| = mu at phi = pi/2 the bands are
        # omega_+- (k) = -i gamma/2 - 2 mu sin k -+ 2 i mu cos k; the often
        # quoted form -i gamma/2 - 2 i mu sin k +- 2 mu cos k uses opposite
        # Fourier gauges e^{+-ikj} for the two quadrature chains, i.e. the
        # same closed curves re-parameterized by a quarter period per band
        gamma, mu = 1.0, 0.3
        spec = ChainSpec(4, 1j * mu, 1j * mu, gamma, boundary="periodic")
        bands = bloch_bands(spec, 128)
        k = bands.k
        assert np.abs(
            bands.omega_plus - (-0.5j * gamma - 2 * mu * np.sin(k) - 2j * mu * np.cos(k))
        ).max() < 1e-12
        assert np.abs(
            bands.omega_minus - (-0.5j * gamma - 2 * mu * np.sin(k) + 2j * mu * np.cos(k))
        ).max() < 1e-12

        def quoted_x(kk):
            return -0.5j * gamma - 2j * mu * np.sin(kk) + 2 * mu * np.cos(kk)

        def quoted_p(kk):
            return -0.5j * gamma - 2j * mu * np.sin(kk) - 2 * mu * np.cos(kk)

        assert np.abs(bands.omega_plus - quoted_x(k + math.pi / 2)).max() < 1e-12
        assert np.abs(bands.omega_minus - quoted_p(k - math.pi / 2)).max() < 1e-12

    def test_uncoupled_bands_flat(self):
        spec = ChainSpec(4, 0.0, 0.0, 0.8)
        bands = bloch_bands(spec, 64)
        assert np.abs(bands.omega_plus + 0.4j).max() < 1e-15
        assert np.abs(bands.omega_minus + 0.4j).max() < 1e-15

    def test_against_real_space_ring(self):
        # bands at Fourier-quantized k must be dynamical eigenvalues of the
        # N = 12 real-space ring (as s = -i omega)
        n = 12
        spec = ChainSpec.common_phase(n, 0.5, 1.0, 0.3, 0.7, boundary="periodic")
        m = build_dynamical_matrix(spec).matrix
        real_space = np.linalg.eigvals(m)
        k = 2 * math.pi * np.arange(n) / n
        from bkchain.spectra import band_frequencies

        wp, wm = band_frequencies(spec, k)
        from_bands = -1j * np.concatenate([wp, wm])
        # multiset comparison robust to degenerate-real-part sorting
        for value in from_bands:
            assert np.abs(real_space - value).min() < 1e-8
        for value in real_space:
            assert np.abs(from_bands - value).min() < 1e-8

    def test_bands_are_closed_curves(self):
        spec = ChainSpec.common_phase(4, 0.5, 1.0, 0.3, 0.7, boundary="periodic")
        from bkchain.spectra import band_frequencies

        w0 = band_frequencies(spec, 0.0)
        w1 = band_frequencies(spec, 2.0 * math.pi)
        assert abs(w0[0] - w1[0]) < 1e-12 and abs(w0[1] - w1[1]) < 1e-12

    def test_matches_numeric_eigenvalues(self, rng):
        for _ in range(8):
            spec = random_common_phase_spec(rng)
            bands = bloch_bands(spec, 64)
            for i in rng.integers(0, 64, size=4):
                evals = np.linalg.eigvals(bloch_matrix(spec, bands.k[i]))
                for value in (bands.omega_plus[i], bands.omega_minus[i]):
                    assert np.abs(evals - value).min() < 1e-10

    def test_numeric_tracker_agrees_on_open_gap(self):
        spec = ChainSpec.common_phase(4, 0.5, 1.0, 1.1, 0.7)
        a = bloch_bands(spec, 128)
        b = track_bands_numeric(spec, 128)
        assert np.abs(a.omega_plus - b.omega_plus).max() < 1e-9
        assert not a.bands_coincide

    def test_numeric_tracker_follows_closed_gap_crossings(self):
        # closed point gap: the two real segments cross; the derivative
        # tie-break carries the labels through
        spec = ChainSpec.common_phase(4, 1.0, 0.2, 0.1, 0.7)
        a = bloch_bands(spec, 256)
        b = track_bands_numeric(spec, 256)
        assert np.abs(a.omega_plus - b.omega_plus).max() < 1e-9

    def test_tracker_rejects_coincident_bands(self):
        # |y| = 1: the closed-gap boundary where both bands collapse
        phi = 0.1
        spec = ChainSpec.common_phase(4, 1.0, math.cos(phi), phi, 0.7)
        assert bloch_bands(spec, 128).bands_coincide
        with pytest.raises(BandTrackingError):
            track_bands_numeric(spec, 128)

    def test_minimum_sampling(self):
        with pytest.raises(ValueError):
            bloch_bands(ChainSpec(2, 1j, 1j, 1.0), 32)


class TestWindingNumbers:
    def test_nontrivial_balanced(self):
        gamma = 1.0
        spec = ChainSpec.ep_family(4, 2.0, gamma)  # 2|lam| = gamma > gamma/2
        assert winding_numbers(spec) == (-1, 1)

    def test_trivial_weak_squeezing(self):
        gamma = 1.0
        spec = ChainSpec.ep_family(4, 0.8, gamma)  # 2|lam| = 0.4 gamma < gamma/2
        assert winding_numbers(spec) == (0, 0)

    def test_closed_gap_always_trivial(self):
        for gamma in (0.05, 0.5, 5.0):
            spec = ChainSpec.common_phase(4, 1.0, 0.4, 0.2, gamma)  # |lam| < |J| cos phi
            assert winding_numbers(spec) == (0, 0)

    def test_boundary_rejected(self):
        gamma = 1.0
        spec = ChainSpec.ep_family(4, 1.0, gamma)  # 2|lam| = gamma/2 exactly
        with pytest.raises(PhaseBoundaryError):
            winding_numbers(spec)

    def test_parity_pairing(self, rng):
        for _ in range(20):
            spec = random_common_phase_spec(rng)
            try:
                nu = winding_numbers(spec)
            except PhaseBoundaryError:
                continue
            assert nu[0] == -nu[1]

    def test_gamma_sweep_flips_winding(self):
        # winding is gamma-independent until the band crosses the origin
        mu = 0.5
        strong = ChainSpec(4, 1j * mu, 1j * mu, 0.3)  # gamma/2 < 2 mu
        weak = ChainSpec(4, 1j * mu, 1j * mu, 4.0)    # gamma/2 > 2 mu
        assert winding_numbers(strong) == (-1, 1)
        assert winding_numbers(ChainSpec(4, 1j * mu, 1j * mu, 1.2)) == (-1, 1)
        assert winding_numbers(weak) == (0, 0)


class TestClassifyPhase:
    def test_nontrivial_regime(self):
        cls = classify_phase(ChainSpec.ep_family(4, 2.0, 1.0))
        assert cls.label == NONTRIVIAL_WINDING
        assert cls.winding == (-1, 1)
        assert cls.origin_winding_value > 0
        assert cls.obc_growth_value < 0  # OBC stays stable at |J| = |lam|

    def test_real_couplings_always_closed(self):
        for gain in (0.2, 1.0, 4.0):
            gamma = 1.0
            mu = gain * gamma / 4
            cls = classify_phase(ChainSpec(4, mu, mu, gamma))
            assert cls.label == POINT_GAP_CLOSED

    def test_open_trivial_regime(self):
        cls = classify_phase(ChainSpec.ep_family(4, 0.5, 1.0))
        assert cls.label == POINT_GAP_OPEN_TRIVIAL
        assert cls.winding == (0, 0)
        assert cls.point_gap_value > 0 > cls.origin_winding_value

    def test_obc_unstable_regime(self):
        spec = ChainSpec.common_phase(4, 0.3, 1.5, 1.2, 0.5)
        cls = classify_phase(spec)
        assert cls.label == OBC_UNSTABLE
        assert cls.obc_growth_value > 0

    def test_threshold_limits_to_unity(self):
        # gamma -> 0: instability onset approaches |lam/J| = 1
        assert obc_instability_threshold(4, 1e-9, 1.0) == pytest.approx(1.0, abs=1e-12)


class TestStability:
    def test_ep_family_flat_spectrum(self):
        for gain in (0.5, 1.0, 2.0, 4.0):
            gamma = 1.0
            rep = obc_stability_report(ChainSpec.ep_family(4, gain, gamma))
            assert rep.stable
            assert rep.growth_rate == pytest.approx(-gamma / 2, abs=1e-9 * gamma)

    def test_uncoupled_growth_rate(self):
        rep = obc_stability_report(ChainSpec(3, 0.0, 0.0, [0.4, 0.8, 1.2]))
        assert rep.growth_rate == pytest.approx(-0.2, abs=1e-12)

    def test_threshold_sign_change(self):
        n, gamma, j = 4, 1.0, 1.0
        threshold = obc_instability_threshold(n, gamma, j)
        above = ChainSpec.common_phase(n, j, 1.01 * threshold * j, math.pi / 2, gamma)
        below = ChainSpec.common_phase(n, j, 0.99 * threshold * j, math.pi / 2, gamma)
        assert growth_rate(above) > 0 > growth_rate(below)

    @pytest.mark.parametrize("ratio", [0.2, 0.5, 1.0])
    def test_bisection_matches_closed_form(self, ratio):
        n, j = 4, 1.0
        gamma = 2.0 * j * ratio
        onset = find_obc_instability_ratio(n, gamma, j, bracket=(1.0, 4.0), tol=1e-10)
        assert onset == pytest.approx(obc_instability_threshold(n, gamma, j), rel=1e-6)

    def test_printed_threshold_variant_differs(self):
        # the verbatim literature expression overestimates the onset by the
        # gamma -> gamma/2 convention mismatch; keep the comparison on record
        n, gamma, j = 4, 1.0, 1.0
        printed = obc_instability_threshold_printed(n, gamma, j)
        actual = find_obc_instability_ratio(n, gamma, j)
        assert printed > actual
        spec = ChainSpec.common_phase(n, j, printed * j, math.pi / 2, gamma)
        assert growth_rate(spec) > 0  # already unstable at the printed value

    def test_pbc_crossing_at_unit_gain(self):
        gamma = 1.0
        g_star = find_pbc_instability_gain(4, gamma, tol=1e-8)
        assert g_star == pytest.approx(1.0, abs=1e-6)

    def test_pbc_bloch_growth_rate(self):
        spec = ChainSpec.ep_family(4, 1.6, 1.0, boundary="periodic")
        assert pbc_growth_rate_bloch(spec) == pytest.approx(growth_rate(spec), abs=1e-12)

    def test_report_carries_boundary(self):
        ring = ChainSpec.ep_family(4, 2.0, 1.0, boundary="periodic")
        rep = stability_report(ring)
        assert rep.boundary == "periodic"
        assert not rep.stable
        assert obc_stability_report(ring).stable  # same amplitudes, open chain

    def test_formula_applicable_flag(self):
        rep = obc_stability_report(ChainSpec.common_phase(4, 1.0, 1.2, 0.9, 0.7))
        assert rep.formula_applicable is True
        assert rep.threshold_ratio == pytest.approx(obc_instability_threshold(4, 0.7, 1.0))


class TestParity:
    def test_bloch_residual_vanishes(self, rng):
        from bkchain.errors import CoalescentTransformError

        checked = 0
        while checked < 30:
            spec = random_common_phase_spec(rng)
            k = float(rng.uniform(0, 2 * math.pi))
            try:
                resid = parity_symmetry_residual(spec, k)
            except CoalescentTransformError:
                continue
            norm = np.abs(bloch_matrix(spec, k)).max()
            assert resid <= 1e-10 * norm
            checked += 1

    def test_real_space_breaking_by_detuning(self):
        gamma = 1.0
        spec = ChainSpec(6, 0.6j, 0.4j, gamma)
        m_norm = np.abs(build_dynamical_matrix(spec).matrix).max()
        assert real_space_parity_residual(spec) <= 1e-12 * m_norm
        detuned = spec.with_detuning(5, 0.3 * gamma)
        assert real_space_parity_residual(detuned) > 1e-3 * m_norm

    def test_real_space_general_phase(self, rng):
        from bkchain.errors import CoalescentTransformError

        checked = 0
        while checked < 10:
            spec = random_common_phase_spec(rng, periodic=False)
            try:
                resid = real_space_parity_residual(spec)
            except CoalescentTransformError:
                continue
            m_norm = np.abs(build_dynamical_matrix(spec).matrix).max()
            assert resid <= 1e-12 * m_norm
            checked += 1

    def test_uncoupled_residual_zero(self):
        spec = ChainSpec(4, 1e-30j, 1e-30j, 1.0)
        assert real_space_parity_residual(spec) < 1e-25


class TestGaugeEquivalence:
    def test_obc_spectra_phase_independent(self):
        # open-gap chains at any phi share the pi/2-mapped OBC spectrum
        gamma = 0.8
        for phi in (0.4, 1.0, 2.2):
            spec = ChainSpec.common_phase(6, 0.7, 0.9, phi, gamma)
            mapped = gauge_mapped_spec(spec)
            ev1 = np.sort_complex(np.linalg.eigvals(build_dynamical_matrix(spec).matrix))
            ev2 = np.sort_complex(np.linalg.eigvals(build_dynamical_matrix(mapped).matrix))
            assert np.abs(ev1 - ev2).max() < 1e-8

    def test_closed_gap_rejected(self):
        with pytest.raises(ValueError):
            gauge_mapped_spec(ChainSpec.common_phase(4, 1.0, 0.3, 0.1, 1.0))
