"""Linear response: susceptibility matrices, amplification channels, gain maps.

The steady-state response of the chain to resonant quadrature drives is
chi(omega) = (i omega 1 + M)^{-1} in the (x_1..x_N, p_1..p_N) basis, with
drives normalized so a single uncoupled resonator obeys |x| = 2 f_x / gamma.
For the balanced imaginary chain (J = lam = i mu, per-link gain G = 4mu/gamma,
open boundary) the resonant susceptibility has the exact triangular form

    chi(0) = -(2/gamma) [ lower-triangular G^{j-k}   |        0
                          ------------------------- | -------------------
                                     0              | upper-tri (-G)^{k-j} ]

whose signed version is implemented in ``resonant_susceptibility_oracle``:
x signals propagate and amplify rightward, p signals leftward, with gain G
per link and zero reverse transmission.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from . import numerics
from .chain import ChainSpec, build_dynamical_matrix
from .errors import PhaseBoundaryError, ResonanceSingularityError, SingularMatrixError
from .spectra import classify_phase

QUADRATURES = ("x", "p")


def quadrature_index(quadrature: str, site: int, n_sites: int) -> int:
    """Flat index of quadrature ('x'|'p') at 0-based site in the 2N basis."""
    if quadrature not in QUADRATURES:
        raise ValueError(f"quadrature must be 'x' or 'p', got {quadrature!r}")
    if not 0 <= site < n_sites:
        raise ValueError(f"site {site} outside 0..{n_sites - 1}")
    return site if quadrature == "x" else n_sites + site


def quadrature_labels(n_sites: int) -> list[str]:
    """Human-facing labels x1..xN, p1..pN matching the basis ordering."""
    return [f"x{j + 1}" for j in range(n_sites)] + [f"p{j + 1}" for j in range(n_sites)]


@dataclass(frozen=True)
class SusceptibilityMatrix:
    """Complex 2N x 2N linear-response matrix chi(omega) = (i omega + M)^{-1}.

    ``matrix[r, c]`` is the steady-state amplitude of quadrature r per unit
    resonant drive of quadrature c (x block first). Element access by
    physical direction is provided by ``element``: the response of b to a
    drive on a is ``element(a, b)``.
    """

    omega: float
    matrix: NDArray
    spec: ChainSpec

    @property
    def n_sites(self) -> int:
        return self.spec.n_sites

    def element(self, drive: tuple[str, int], response: tuple[str, int]) -> complex:
        """chi_{drive -> response}; both arguments are ('x'|'p', site)."""
        n = self.n_sites
        r = quadrature_index(response[0], response[1], n)
        c = quadrature_index(drive[0], drive[1], n)
        return complex(self.matrix[r, c])

    def block(self, row: str, col: str) -> NDArray:
        n = self.n_sites
        idx = {"x": slice(0, n), "p": slice(n, 2 * n)}
        return self.matrix[idx[row], idx[col]]


def susceptibility(spec: ChainSpec, omega: float = 0.0) -> SusceptibilityMatrix:
    """Exact linear-response matrix at probe frequency omega (0 = resonant)."""
    m = build_dynamical_matrix(spec).matrix
    n2 = m.shape[0]
    a = 1j * omega * np.eye(n2) + m
    try:
        chi = numerics.solve_linear(a, np.eye(n2, dtype=complex))
    except SingularMatrixError as exc:
        raise ResonanceSingularityError(
            f"probe frequency omega = {omega!r} hits an (almost) undamped resonance: {exc}",
            condition=exc.condition,
        ) from exc
    return SusceptibilityMatrix(omega=float(omega), matrix=chi, spec=spec)


def ep_susceptibility_matrix(n_sites: int, gain: float, gamma: float) -> NDArray:
    """Closed-form resonant susceptibility of the balanced open chain.

    No linear solve: the x block is lower triangular with entries G^{j-k}
    and the p block upper triangular with entries (-G)^{k-j}, both times
    the single-resonator factor -2/gamma.
    """
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if gain < 0:
        raise ValueError("gain must be non-negative")
    j = np.arange(n_sites)
    diff = j[:, None] - j[None, :]
    with np.errstate(invalid="ignore"):
        xx = np.where(diff >= 0, float(gain) ** np.maximum(diff, 0), 0.0)
        pp = np.where(diff <= 0, (-float(gain)) ** np.maximum(-diff, 0), 0.0)
    zero = np.zeros((n_sites, n_sites))
    return (-2.0 / gamma) * np.block([[xx, zero], [zero, pp]]).astype(complex)


def resonant_susceptibility_oracle(spec: ChainSpec) -> SusceptibilityMatrix:
    """Closed-form chi(0) for specs in the balanced-imaginary family.

    Rejects anything outside J = lam = i mu, uniform damping, zero
    detuning, open boundary; for those parameters it must agree entrywise
    with ``susceptibility(spec, 0)``.
    """
    if not spec.is_ep_family():
        raise ValueError("closed form requires the balanced chain J = lam = i*mu")
    if spec.periodic:
        raise ValueError("closed form holds for the open chain only")
    if any(abs(e) > 0 for e in spec.detuning):
        raise ValueError("closed form requires zero detuning")
    gamma = spec.uniform_damping
    matrix = ep_susceptibility_matrix(spec.n_sites, spec.gain, gamma)
    return SusceptibilityMatrix(omega=0.0, matrix=matrix, spec=spec)


@dataclass(frozen=True)
class ChannelGains:
    """Singular values of chi (descending) and the two-channel diagnostic.

    ``two_channel_ratio`` = sigma_2 / sigma_3 measures the separation of
    the two amplifying channels (the x and p directional chains) from the
    remaining transmission channels.
    """

    singular_values: NDArray
    two_channel_ratio: float


def channel_gains(chi: SusceptibilityMatrix | NDArray) -> ChannelGains:
    matrix = chi.matrix if isinstance(chi, SusceptibilityMatrix) else np.asarray(chi)
    s = numerics.svd(matrix).singular_values
    ratio = float(s[1] / s[2]) if s.size >= 3 and s[2] > 0 else math.inf
    return ChannelGains(singular_values=s, two_channel_ratio=ratio)


@dataclass(frozen=True)
class GainMapResult:
    """Gridded end-to-end gain with phase labels.

    ``gain[i, j]`` is |chi_{x_1 -> x_N}(0)| at phase ``phi[i]`` and ratio
    ``ratio[j]``; dynamically unstable grid points carry NaN gain but keep
    their regime label (instability is data, not failure). Labels on a
    phase boundary are the string "boundary".
    """

    phi: NDArray
    ratio: NDArray
    gain: NDArray
    labels: NDArray
    winding_plus: NDArray


def _gain_map_point(args) -> tuple[float, str, int]:
    from .spectra import growth_rate

    base, phi, ratio = args
    mj = abs(base.hopping)
    spec = ChainSpec.common_phase(
        base.n_sites, mj, ratio * mj, phi, base.damping, base.detuning, "open"
    )
    try:
        cls = classify_phase(spec)
        label = cls.label
        nu = cls.winding[0] if cls.winding is not None else 0
    except PhaseBoundaryError:
        label, nu = "boundary", 0
    if not growth_rate(spec) < 0:
        return math.nan, label, nu
    chi = susceptibility(spec, 0.0)
    n = spec.n_sites
    return abs(chi.element(("x", 0), ("x", n - 1))), label, nu


def end_to_end_gain_map(
    base: ChainSpec,
    phi_values: Optional[Sequence[float]] = None,
    ratio_values: Optional[Sequence[float]] = None,
    threads: int = 1,
) -> GainMapResult:
    """Sweep |chi_{x_1 -> x_N}| and the phase label over (phi, lam/J).

    Defaults match a 101 x 101 grid over phi in [0, pi] and lam/J in
    [0, 2]. Grid points are independent; with ``threads > 1`` they are
    evaluated on a thread pool and aggregated in grid order, so the output
    is identical to the serial sweep.
    """
    phi_values = np.linspace(0.0, math.pi, 101) if phi_values is None else np.asarray(phi_values, float)
    ratio_values = np.linspace(0.0, 2.0, 101) if ratio_values is None else np.asarray(ratio_values, float)
    tasks = [(base, phi, ratio) for phi in phi_values for ratio in ratio_values]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            flat = list(pool.map(_gain_map_point, tasks))
    else:
        flat = [_gain_map_point(t) for t in tasks]
    shape = (len(phi_values), len(ratio_values))
    gain = np.array([f[0] for f in flat]).reshape(shape)
    labels = np.array([f[1] for f in flat], dtype=object).reshape(shape)
    nu = np.array([f[2] for f in flat], dtype=int).reshape(shape)
    return GainMapResult(phi=phi_values, ratio=ratio_values, gain=gain,
                         labels=labels, winding_plus=nu)


@dataclass(frozen=True)
class NonreciprocityReport:
    """Quadrature nonreciprocity diagnostics of the real-coupling dimer chain.

    At phi = 0 with |J| = |lam| the only surviving response is x_j -> p_{j+-1}
    at magnitude (2/gamma) G per neighbour; p -> x transmission is forbidden
    by destructive interference between the hopping and squeezing paths, for
    either boundary condition. ``boundary_independent`` records that the
    nearest-neighbour pattern of the opposite boundary condition matches.
    """

    forward_neighbor_magnitude: float
    max_reverse_transmission: float
    max_beyond_neighbor: float
    norm: float
    boundary: str
    boundary_independent: bool
    trivially_reciprocal: bool


def _nonreciprocity_pattern(spec: ChainSpec) -> tuple[float, float, float, float]:
    chi = susceptibility(spec, 0.0)
    n = spec.n_sites
    norm = float(np.abs(chi.matrix).max())
    px = np.abs(chi.block("p", "x"))  # response p (rows) to x drives (cols)
    xp = np.abs(chi.block("x", "p"))
    neighbor = np.zeros((n, n), dtype=bool)
    for j in range(n - 1):
        neighbor[j + 1, j] = neighbor[j, j + 1] = True
    if spec.periodic:
        neighbor[0, n - 1] = neighbor[n - 1, 0] = True
    forward = float(px[neighbor].min()) if neighbor.any() else 0.0
    beyond = float(px[~neighbor].max()) if (~neighbor).any() else 0.0
    return forward, float(xp.max()), beyond, norm


def nonreciprocity_report(spec: ChainSpec) -> NonreciprocityReport:
    mj, ml = abs(spec.hopping), abs(spec.squeezing)
    if mj == 0 and ml == 0:
        return NonreciprocityReport(0.0, 0.0, 0.0, 0.0, spec.boundary, True, True)
    phi = spec.phase
    if abs(math.sin(phi)) > 1e-12 or abs(mj - ml) > 1e-12 * max(mj, ml):
        raise ValueError("nonreciprocity analysis requires phi = 0 and |J| = |lam|")
    if any(abs(e) > 0 for e in spec.detuning):
        raise ValueError("nonreciprocity analysis requires zero detuning")
    forward, reverse, beyond, norm = _nonreciprocity_pattern(spec)
    independent = True
    if spec.n_sites > 1:
        flipped = ChainSpec(spec.n_sites, spec.hopping, spec.squeezing, spec.damping,
                            spec.detuning, "open" if spec.periodic else "periodic")
        other = _nonreciprocity_pattern(flipped)
        independent = (
            abs(other[0] - forward) <= 1e-10 * max(norm, 1e-300)
            and other[1] <= 1e-12 * max(other[3], 1e-300)
            and other[2] <= 1e-12 * max(other[3], 1e-300)
        )
    return NonreciprocityReport(
        forward_neighbor_magnitude=forward,
        max_reverse_transmission=reverse,
        max_beyond_neighbor=beyond,
        norm=norm,
        boundary=spec.boundary,
        boundary_independent=independent,
        trivially_reciprocal=False,
    )
