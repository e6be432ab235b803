"""Thermal steady states: covariances, populations, and fluctuation spectra.

The chain driven only by its thermal baths settles (when stable) into a
Gaussian state whose symmetrized covariance solves the Lyapunov equation
M Sigma + Sigma M^T + D = 0 with D = diag(gamma_j (n_th,j + 1/2)) repeated
over the x and p blocks. Squeezing amplifies fluctuations above their
equilibrium level; for the four-site balanced chain the site populations
have closed polynomial/rational forms in the per-link gain G implemented in
``closed_form_population``.

Two population conventions coexist:

* quantum (vacuum included): n_j = (Sigma_xx + Sigma_pp - 1)/2 with the
  bath at n_th + 1/2 -- what ``steady_covariance`` reports;
* classical ratio: the large-n_th limit n_j / n_th, an n_th-independent
  amplification factor -- what ``population_amplification`` reports and
  what the closed forms state.

They are related exactly by n_quantum = n_th * f + (f - 1)/2 with f the
amplification factor, so either can be read off from the other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from . import numerics
from .chain import ChainSpec, build_dynamical_matrix
from .errors import NonHurwitzError, UnstableChainError
from .response import susceptibility

VACUUM_FLOOR = 0.5


def _bath_occupations(spec: ChainSpec, n_th) -> NDArray:
    n = spec.n_sites
    if np.isscalar(n_th):
        occ = np.full(n, float(n_th))
    else:
        occ = np.asarray(n_th, dtype=float)
        if occ.shape != (n,):
            raise ValueError(f"n_th must be scalar or length {n}")
    if np.any(occ < 0):
        raise ValueError("bath occupations must be non-negative")
    return occ


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetrized steady-state second moments of q = (x, p).

    ``sigma`` is symmetric positive semidefinite with diagonal >= 1/2
    (vacuum floor) when ``vacuum_included``. ``site_populations`` converts
    the diagonal to per-site occupations in the matching convention.
    """

    sigma: NDArray
    bath_occupations: NDArray
    spec: ChainSpec
    vacuum_included: bool = True

    @property
    def n_sites(self) -> int:
        return self.spec.n_sites

    def site_populations(self) -> NDArray:
        n = self.n_sites
        diag = np.diag(self.sigma)
        pair = 0.5 * (diag[:n] + diag[n:])
        return pair - VACUUM_FLOOR if self.vacuum_included else pair


def steady_covariance(spec: ChainSpec, n_th, include_vacuum: bool = True) -> CovarianceMatrix:
    """Solve the Lyapunov equation for the thermal steady state.

    ``include_vacuum`` selects the bath strength gamma_j (n_th,j + 1/2)
    (quantum convention, default) or gamma_j n_th,j (classical). Unstable
    chains -- the periodic balanced chain at G >= 1, where populations
    diverge -- are reported via UnstableChainError.
    """
    occ = _bath_occupations(spec, n_th)
    m = build_dynamical_matrix(spec).matrix
    strength = occ + (VACUUM_FLOOR if include_vacuum else 0.0)
    d = np.concatenate([np.asarray(spec.damping) * strength] * 2)
    try:
        sigma = numerics.solve_lyapunov(m, np.diag(d))
    except NonHurwitzError as exc:
        raise UnstableChainError(
            f"no thermal steady state: {exc} (populations diverge at the instability)"
        ) from exc
    return CovarianceMatrix(sigma=sigma, bath_occupations=occ, spec=spec,
                            vacuum_included=include_vacuum)


def population_amplification(spec: ChainSpec) -> NDArray:
    """Per-site amplification factor f_j = n_j / n_th (classical limit).

    Computed from the classical-convention Lyapunov solve at unit bath
    occupation; n_th-independent by linearity.
    """
    cov = steady_covariance(spec, 1.0, include_vacuum=False)
    return cov.site_populations()


OUTER_SITES = (0, 3)
INNER_SITES = (1, 2)


def closed_form_population(gain: float, n_th: float, boundary: str, site: int) -> float:
    """Closed-form population of the four-site balanced chain.

    Valid for N = 4, J = lam = i*mu, uniform damping. Open chain:

        n_outer = n_th (1 + G^2/4 + 3 G^4/16 + 5 G^6/32)   (sites 1 and 4)
        n_inner = n_th (1 + G^2/2 + 3 G^4/16)              (sites 2 and 3)

    -- the inner polynomial has lower degree because the amplification
    chains feeding the inner sites are shorter. Periodic chain (any site,
    translation invariance), diverging at the G -> 1 instability:

        n = n_th (1 + (G^2/2) / (1 - G^2)),   G < 1.
    """
    if gain < 0:
        raise ValueError("gain must be non-negative")
    if not 0 <= site < 4:
        raise ValueError("closed forms are specific to the four-site chain")
    g2 = gain * gain
    if boundary == "periodic":
        if gain >= 1.0:
            raise UnstableChainError(
                "periodic chain is unstable for G >= 1; populations diverge"
            )
        return n_th * (1.0 + 0.5 * g2 / (1.0 - g2))
    if boundary != "open":
        raise ValueError(f"unknown boundary {boundary!r}")
    if site in OUTER_SITES:
        return n_th * (1.0 + g2 / 4.0 + 3.0 * g2**2 / 16.0 + 5.0 * g2**3 / 32.0)
    return n_th * (1.0 + g2 / 2.0 + 3.0 * g2**2 / 16.0)


@dataclass(frozen=True)
class ThermalSpectrum:
    """Per-site symmetrized power spectral densities on an omega grid.

    ``psd[i, j]`` is S_j(omega_i) = Re( [chi D chi^H]_{x_j x_j}
    + [chi D chi^H]_{p_j p_j} ) / 2, normalized so that
    integral S_j domega = 2 pi (n_j + 1/2).
    """

    omegas: NDArray
    psd: NDArray
    populations: NDArray
    spec: ChainSpec


def thermal_spectrum(spec: ChainSpec, n_th, omegas: Sequence[float]) -> ThermalSpectrum:
    """Sample the thermal fluctuation spectra of a stable chain.

    The linear-response form S(omega) = chi(omega) D chi(omega)^H with the
    same bath matrix D as the covariance; the trapezoid integral over a
    sufficiently wide grid reproduces 2 pi (n_j + 1/2) per site.
    """
    occ = _bath_occupations(spec, n_th)
    cov = steady_covariance(spec, n_th)  # also rejects unstable chains
    d = np.diag(np.concatenate([np.asarray(spec.damping) * (occ + VACUUM_FLOOR)] * 2))
    omegas = np.asarray(omegas, dtype=float)
    n = spec.n_sites
    psd = np.empty((omegas.size, n))
    for i, omega in enumerate(omegas):
        chi = susceptibility(spec, omega).matrix
        s = chi @ d @ chi.conj().T
        psd[i] = 0.5 * (np.real(np.diag(s)[:n]) + np.real(np.diag(s)[n:]))
    return ThermalSpectrum(omegas=omegas, psd=psd,
                           populations=cov.site_populations(), spec=spec)
