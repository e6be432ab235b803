"""Bloch bands, spectral winding, phase classification, and stability.

Under periodic boundary conditions the chain's two complex bands are

    omega_pm(k) = -i gamma/2 - ( 2|J| sin(phi) sin(k)
                                 +/- 2i sqrt(|lam|^2 - |J|^2 cos^2 phi) cos(k) ),

closed curves in the complex plane whose geometry controls everything
observable: a point gap opens when |lam| > |J||cos phi|; the bands wind the
origin (nontrivial topology, directional end-to-end amplification of the
open chain, convective instability of the closed chain) when additionally
gamma/2 < 2 sqrt(|lam|^2 - |J|^2 cos^2 phi); and the open chain itself goes
unstable only at much stronger squeezing, when the Hatano-Nelson product
|lam|^2 - |J|^2 exceeds (gamma/4)^2 sec^2(pi/(N+1)).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from . import numerics
from .chain import (
    ChainSpec,
    bloch_matrix,
    build_dynamical_matrix,
    local_quadrature_transform,
    quadrature_to_mode_basis,
)
from .errors import BandTrackingError, CurveTouchesReferenceError, PhaseBoundaryError

POINT_GAP_CLOSED = "point-gap-closed"
POINT_GAP_OPEN_TRIVIAL = "point-gap-open-trivial"
NONTRIVIAL_WINDING = "nontrivial-winding"
OBC_UNSTABLE = "obc-unstable"

#: Relative margin below which a parameter point is treated as sitting on a
#: phase boundary rather than silently classified.
BOUNDARY_TOL = 1e-9


def _require_uniform_zero_detuning(spec: ChainSpec) -> float:
    if any(abs(e) > 0 for e in spec.detuning):
        raise ValueError("band analysis requires zero detuning")
    return spec.uniform_damping


def point_gap_axis(spec: ChainSpec) -> complex:
    """Half-axis b of the band ellipse along the imaginary direction.

    b = sqrt(|lam|^2 - |J|^2 cos^2 phi); real and positive when the point
    gap is open, imaginary when it is closed (the bands then collapse onto
    a line segment).
    """
    mj, ml = abs(spec.hopping), abs(spec.squeezing)
    return cmath.sqrt(ml**2 - mj**2 * math.cos(spec.phase) ** 2)


def band_frequencies(spec: ChainSpec, k) -> tuple[NDArray, NDArray]:
    """Closed-form band pair (omega_plus, omega_minus) at wavevector(s) k.

    omega_plus reduces to the x band at phi = pi/2 and omega_minus to the
    p band. Both are smooth in k, so the labels are continuous across the
    whole grid by construction.
    """
    gamma = _require_uniform_zero_detuning(spec)
    k = np.asarray(k, dtype=float)
    mj = abs(spec.hopping)
    phi = spec.phase
    b = point_gap_axis(spec)
    common = -0.5j * gamma - 2.0 * mj * math.sin(phi) * np.sin(k)
    return common - 2j * b * np.cos(k), common + 2j * b * np.cos(k)


@dataclass(frozen=True)
class ComplexSpectrum:
    """Two complex bands sampled on a k grid in [0, 2*pi).

    The two bands cross transversally at cos k = 0 (the Bloch generator is
    diagonal-degenerate there); the analytic labels stay smooth through the
    crossings. ``bands_coincide`` flags the closed-gap boundary |y| = 1,
    where the half-axis b vanishes and the two bands collapse onto one
    curve, making any labeling arbitrary.
    """

    k: NDArray
    omega_plus: NDArray
    omega_minus: NDArray
    spec: ChainSpec
    bands_coincide: bool

    @property
    def bands(self) -> tuple[NDArray, NDArray]:
        return self.omega_plus, self.omega_minus


def _bands_coincide(spec: ChainSpec) -> bool:
    scale = max(abs(spec.hopping), abs(spec.squeezing), 1e-300)
    return bool(abs(point_gap_axis(spec)) < 1e-9 * scale)


def bloch_bands(spec: ChainSpec, n_k: int = 256) -> ComplexSpectrum:
    """Sample both bands on a uniform k grid.

    The bands come from the closed form (smooth branch labels); a numeric
    eigendecomposition cross-check is available via ``track_bands_numeric``.
    """
    if n_k < 64:
        raise ValueError("n_k must be at least 64")
    k = np.linspace(0.0, 2.0 * np.pi, n_k, endpoint=False)
    wp, wm = band_frequencies(spec, k)
    return ComplexSpectrum(k=k, omega_plus=wp, omega_minus=wm, spec=spec,
                           bands_coincide=_bands_coincide(spec))


def track_bands_numeric(spec: ChainSpec, n_k: int = 256) -> ComplexSpectrum:
    """Bands from per-k eigendecomposition with nearest-neighbour tracking.

    Matching is by distance in the complex plane with ties broken by
    derivative continuity (a linear prediction from the previous step),
    which carries the labels through the transversal crossings at
    cos k = 0. On the closed-gap boundary the two bands coincide entirely
    and no labeling exists: BandTrackingError.
    """
    if n_k < 64:
        raise ValueError("n_k must be at least 64")
    if _bands_coincide(spec):
        raise BandTrackingError(
            "bands coincide (closed-gap boundary |y| = 1); labels are arbitrary"
        )
    k = np.linspace(0.0, 2.0 * np.pi, n_k, endpoint=False)
    w0 = np.linalg.eigvals(bloch_matrix(spec, k[0]))
    wp_ref, _ = band_frequencies(spec, k[0])
    order = np.argsort(np.abs(w0 - wp_ref))
    prev = w0[order]
    deriv = np.zeros(2, dtype=complex)
    dk = k[1] - k[0]
    plus = [prev[0]]
    minus = [prev[1]]
    scale = max(np.abs(prev).max(), 1e-300)
    for kk in k[1:]:
        w = np.linalg.eigvals(bloch_matrix(spec, kk))
        predicted = prev + deriv * dk
        direct = abs(w[0] - predicted[0]) + abs(w[1] - predicted[1])
        swapped = abs(w[1] - predicted[0]) + abs(w[0] - predicted[1])
        if abs(direct - swapped) < 1e-12 * scale and abs(w[0] - w[1]) > 1e-9 * scale:
            raise BandTrackingError(f"ambiguous band assignment at k = {kk:.6f}")
        chosen = w if direct <= swapped else w[::-1]
        deriv = (chosen - prev) / dk
        prev = chosen
        plus.append(prev[0])
        minus.append(prev[1])
    return ComplexSpectrum(k=k, omega_plus=np.array(plus), omega_minus=np.array(minus),
                           spec=spec, bands_coincide=False)


def winding_numbers(spec: ChainSpec, n_k: int = 4096) -> tuple[int, int]:
    """Spectral winding pair (nu_plus, nu_minus) of the bands about the origin.

    Computed with the discrete argument principle on ``n_k`` samples. The
    pair always satisfies nu_plus = -nu_minus (parity). Parameters whose
    band passes through the origin sit on the phase boundary and raise
    PhaseBoundaryError.
    """
    spectrum = bloch_bands(spec, n_k)
    scale = max(np.abs(spectrum.omega_plus).max(), np.abs(spectrum.omega_minus).max(), 1e-300)
    try:
        nu_p = numerics.winding_from_samples(spectrum.omega_plus, 0.0, min_distance=1e-9 * scale)
        nu_m = numerics.winding_from_samples(spectrum.omega_minus, 0.0, min_distance=1e-9 * scale)
    except CurveTouchesReferenceError as exc:
        raise PhaseBoundaryError(f"on phase boundary: {exc}") from exc
    return nu_p, nu_m


def obc_instability_threshold(n_sites: int, gamma: float, hopping_magnitude: float) -> float:
    """Amplitude ratio |lam/J| at which the open chain loses stability.

    The open-chain generator splits into two real tridiagonal Toeplitz
    blocks with hopping product |lam|^2 - |J|^2, whose extremal eigenvalue
    is -gamma/2 + 2 sqrt(|lam|^2 - |J|^2) cos(pi/(N+1)); the zero crossing
    gives

        |lam/J| = sqrt( 1 + (gamma/(4|J|))^2 sec^2(pi N/(N+1)) ).

    This matches eigenvalue bisection to machine precision and is
    independent of the interaction phase (open-gap chains at any phi are
    locally equivalent to phi = pi/2 with the same |lam|^2 - |J|^2). Note
    a widely quoted variant of this expression (see
    ``obc_instability_threshold_printed``) carries gamma/(2|J|) instead of
    gamma/(4|J|); that version does not reproduce the eigenvalue crossing.
    """
    if n_sites < 2:
        raise ValueError("threshold requires at least two sites")
    if hopping_magnitude <= 0:
        raise ValueError("threshold ratio requires |J| > 0")
    sec2 = 1.0 / math.cos(math.pi * n_sites / (n_sites + 1)) ** 2
    return math.sqrt(1.0 + (gamma / (4.0 * hopping_magnitude)) ** 2 * sec2)


def obc_instability_threshold_printed(n_sites: int, gamma: float, hopping_magnitude: float) -> float:
    """The literature form sqrt(1 + (gamma/(2J))^2 sec^2(pi N/(N+1))).

    Kept verbatim for comparison; it overestimates the onset (its damping
    coefficient corresponds to amplitude rather than energy decay rate).
    """
    if n_sites < 2:
        raise ValueError("threshold requires at least two sites")
    if hopping_magnitude <= 0:
        raise ValueError("threshold ratio requires |J| > 0")
    sec2 = 1.0 / math.cos(math.pi * n_sites / (n_sites + 1)) ** 2
    return math.sqrt(1.0 + (gamma / (2.0 * hopping_magnitude)) ** 2 * sec2)


def obc_closed_form_growth_rate(spec: ChainSpec) -> float:
    """Closed-form maximal growth rate of the open chain.

    max Re s = -gamma/2 + 2 sqrt(max(|lam|^2 - |J|^2, 0)) cos(pi/(N+1)).
    For |lam| <= |J| the off-diagonal product is non-positive and the
    extremal real part stays at -gamma/2.
    """
    gamma = spec.uniform_damping
    n = spec.n_sites
    prod = abs(spec.squeezing) ** 2 - abs(spec.hopping) ** 2
    if n < 2 or prod <= 0:
        return -gamma / 2.0
    return -gamma / 2.0 + 2.0 * math.sqrt(prod) * math.cos(math.pi / (n + 1))


def growth_rate(spec: ChainSpec) -> float:
    """Maximal real part of the dynamical-matrix eigenvalues."""
    m = build_dynamical_matrix(spec).matrix
    return float(numerics.eigendecompose(m).values[0].real)


@dataclass(frozen=True)
class StabilityReport:
    """Stability summary for one boundary condition.

    ``stable`` is the strict sign of the numerically computed growth rate;
    values inside the +/- dead band (1e-9 * gamma) are flagged marginal
    rather than silently trusted. When the chain admits the closed-form
    open-boundary threshold, ``threshold_ratio`` carries the predicted
    |lam/J| onset and ``formula_applicable`` records whether the
    eigenvalue test agrees with the closed form within the dead band.
    """

    boundary: str
    growth_rate: float
    stable: bool
    dead_band: float
    marginal: bool
    threshold_ratio: Optional[float] = None
    closed_form_growth: Optional[float] = None
    formula_applicable: Optional[bool] = None


def obc_stability_report(spec: ChainSpec) -> StabilityReport:
    """Stability of the open-boundary chain against the closed-form onset."""
    open_spec = (
        spec
        if not spec.periodic
        else ChainSpec(spec.n_sites, spec.hopping, spec.squeezing, spec.damping,
                       spec.detuning, "open")
    )
    rate = growth_rate(open_spec)
    try:
        gamma = open_spec.uniform_damping
    except ValueError:
        gamma = max(open_spec.damping)
    dead = 1e-9 * max(gamma, 1e-300)
    threshold = None
    closed_form = None
    applicable = None
    detuned = any(abs(e) > 0 for e in open_spec.detuning)
    if not detuned:
        try:
            open_spec.phase
            gamma_u = open_spec.uniform_damping
            closed_form = obc_closed_form_growth_rate(open_spec)
            applicable = abs(closed_form - rate) <= max(dead, 1e-9 * abs(rate))
            if abs(open_spec.hopping) > 0 and open_spec.n_sites >= 2:
                threshold = obc_instability_threshold(
                    open_spec.n_sites, gamma_u, abs(open_spec.hopping)
                )
        except ValueError:
            pass
    return StabilityReport(
        boundary="open",
        growth_rate=rate,
        stable=rate < 0.0,
        dead_band=dead,
        marginal=abs(rate) < dead,
        threshold_ratio=threshold,
        closed_form_growth=closed_form,
        formula_applicable=applicable,
    )


def stability_report(spec: ChainSpec) -> StabilityReport:
    """Stability report honoring the spec's own boundary condition."""
    if not spec.periodic:
        return obc_stability_report(spec)
    rate = growth_rate(spec)
    gamma = max(spec.damping)
    dead = 1e-9 * max(gamma, 1e-300)
    return StabilityReport(
        boundary="periodic",
        growth_rate=rate,
        stable=rate < 0.0,
        dead_band=dead,
        marginal=abs(rate) < dead,
    )


def pbc_growth_rate_bloch(spec: ChainSpec) -> float:
    """Continuum periodic growth rate -gamma/2 + 2 Re sqrt(|lam|^2 - |J|^2 cos^2 phi)."""
    gamma = _require_uniform_zero_detuning(spec)
    b = point_gap_axis(spec)
    return -gamma / 2.0 + 2.0 * b.real


def find_pbc_instability_gain(
    n_sites: int,
    gamma: float,
    gain_bracket: tuple[float, float] = (0.0, 4.0),
    tol: float = 1e-7,
) -> float:
    """Bisect the per-link gain G at which the periodic balanced chain destabilizes."""
    lo, hi = gain_bracket

    def rate(g: float) -> float:
        return growth_rate(ChainSpec.ep_family(n_sites, g, gamma, boundary="periodic"))

    if rate(lo) >= 0 or rate(hi) <= 0:
        raise ValueError("bracket does not straddle the instability")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if rate(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_obc_instability_ratio(
    n_sites: int,
    gamma: float,
    hopping_magnitude: float,
    bracket: tuple[float, float] = (1.0, 8.0),
    tol: float = 1e-9,
) -> float:
    """Bisect the |lam/J| ratio at which the open chain destabilizes (phi = pi/2)."""
    lo, hi = bracket

    def rate(ratio: float) -> float:
        spec = ChainSpec.common_phase(
            n_sites, hopping_magnitude, ratio * hopping_magnitude, math.pi / 2, gamma
        )
        return growth_rate(spec)

    if rate(lo) >= 0 or rate(hi) <= 0:
        raise ValueError("bracket does not straddle the instability")
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if rate(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class PhaseClassification:
    """Regime label plus the three scalar threshold diagnostics.

    * ``point_gap_value`` = |lam| - |J||cos phi|  (> 0: gap open)
    * ``origin_winding_value`` = 2 b - gamma/2 with b the real imaginary
      half-axis (> 0: bands wind the origin)
    * ``obc_growth_value``: closed-form open-chain growth rate (> 0:
      fully unstable regime)

    ``winding`` is the integer pair (nu_plus, nu_minus) where computable;
    it satisfies nu_plus = -nu_minus.
    """

    label: str
    winding: Optional[tuple[int, int]]
    point_gap_value: float
    origin_winding_value: float
    obc_growth_value: float


def classify_phase(spec: ChainSpec, n_k: int = 4096) -> PhaseClassification:
    """Assign one of the four dynamical regimes of the generalized chain.

    Evaluation order matters and mirrors the phase diagram's layering: the
    fully unstable (open-chain) regime dominates, then nontrivial winding,
    then the trivial open-gap regime, and finally the closed-gap regime.
    Points within tolerance of a boundary raise PhaseBoundaryError.
    """
    gamma = _require_uniform_zero_detuning(spec)
    mj, ml = abs(spec.hopping), abs(spec.squeezing)
    phi = spec.phase
    scale = max(mj, ml, gamma, 1e-300)

    point_gap_value = ml - mj * abs(math.cos(phi))
    b = point_gap_axis(spec)
    origin_winding_value = 2.0 * b.real - gamma / 2.0
    obc_growth_value = obc_closed_form_growth_rate(spec)

    obc_rate = growth_rate(
        ChainSpec(spec.n_sites, spec.hopping, spec.squeezing, spec.damping,
                  spec.detuning, "open")
    )
    if abs(obc_rate) < BOUNDARY_TOL * scale:
        raise PhaseBoundaryError("on phase boundary: open-chain growth rate at zero")
    if obc_rate > 0:
        winding = None
        if point_gap_value > BOUNDARY_TOL * scale and abs(origin_winding_value) > BOUNDARY_TOL * scale:
            winding = winding_numbers(spec, n_k)
        return PhaseClassification(OBC_UNSTABLE, winding, point_gap_value,
                                   origin_winding_value, obc_growth_value)

    if point_gap_value > 0:
        if abs(origin_winding_value) < BOUNDARY_TOL * scale:
            raise PhaseBoundaryError("on phase boundary: band touching the origin")
        winding = winding_numbers(spec, n_k)
        nontrivial_geometric = origin_winding_value > 0
        if (winding[0] != 0) != nontrivial_geometric:
            raise PhaseBoundaryError(
                "winding integral and geometric test disagree; too close to a boundary"
            )
        label = NONTRIVIAL_WINDING if winding[0] != 0 else POINT_GAP_OPEN_TRIVIAL
        return PhaseClassification(label, winding, point_gap_value,
                                   origin_winding_value, obc_growth_value)

    return PhaseClassification(POINT_GAP_CLOSED, (0, 0), point_gap_value,
                               origin_winding_value, obc_growth_value)


def parity_symmetry_residual(spec: ChainSpec, k: float) -> float:
    """Bloch-level parity residual || B(k + pi/2) W - W B(-k + pi/2) ||_inf.

    W is the intertwiner built from the local quadrature eigenvector pair
    (V sigma_x V^{-1}); the residual vanishes for any zero-detuning chain
    and quantifies the breaking otherwise. Propagates the coalescent-pair
    error at |y| = 1.
    """
    w = local_quadrature_transform(spec).parity_intertwiner
    lhs = bloch_matrix(spec, k + math.pi / 2) @ w
    rhs = w @ bloch_matrix(spec, -k + math.pi / 2)
    return float(np.abs(lhs - rhs).max())


def real_space_parity_residual(spec: ChainSpec) -> float:
    """Real-space parity residual || Pi T Pi^{-1} - T ||_inf.

    T is the dynamical generator in the per-site (a, a*) basis and Pi
    combines site reversal, the alternating gauge (-1)^j, and the local
    intertwiner W. The residual is zero (to roundoff) for zero detuning
    and of order eps when any site is detuned. Periodic chains require
    even N for the alternating gauge to close.
    """
    if spec.periodic and spec.n_sites % 2:
        raise ValueError("real-space parity check on a ring requires even N")
    n = spec.n_sites
    spec0 = ChainSpec(n, spec.hopping, spec.squeezing, spec.damping,
                      (0.0,) * n, spec.boundary)
    w = local_quadrature_transform(spec0).parity_intertwiner
    t = quadrature_to_mode_basis(build_dynamical_matrix(spec).matrix)
    reversal = np.eye(n)[::-1]
    gauge = np.diag((-1.0) ** np.arange(n))
    site_op = gauge @ reversal
    pi = np.block([[site_op * w[0, 0], site_op * w[0, 1]],
                   [site_op * w[1, 0], site_op * w[1, 1]]])
    residual = pi @ t @ np.linalg.inv(pi) - t
    return float(np.abs(residual).max())


def gauge_mapped_spec(spec: ChainSpec) -> ChainSpec:
    """Map an open-gap chain at phase phi onto its phi = pi/2 equivalent.

    The local transform sends (|J|, |lam|, phi) to
    (|J| |sin phi|, sqrt(|lam|^2 - |J|^2 cos^2 phi), pi/2) without touching
    damping or boundary; open-boundary spectra of the two chains coincide
    exactly.
    """
    b = point_gap_axis(spec)
    if b.imag != 0:
        raise ValueError("gauge mapping to pi/2 requires an open point gap")
    mj = abs(spec.hopping) * abs(math.sin(spec.phase))
    return ChainSpec(spec.n_sites, 1j * mj, 1j * b.real, spec.damping,
                     spec.detuning, spec.boundary)
