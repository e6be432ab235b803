"""Chain parameterization and real-space quadrature dynamics.

The model is a one-dimensional chain of N bosonic modes coupled by uniform
nearest-neighbour beamsplitter (hopping) and two-mode-squeezing (pairing)
interactions,

    H = sum_j ( J a_{j+1}^dag a_j + lam a_{j+1}^dag a_j^dag + h.c. ),

written in frames rotating at each mode frequency, with per-site damping
gamma_j and optional per-site detunings eps_j. In the Hermitian quadratures
x_j = (a_j + a_j^dag)/sqrt(2), p_j = -i(a_j - a_j^dag)/sqrt(2) the dynamics
is linear and real,

    qdot = M q - sqrt(Gamma) q_in,     q = (x_1..x_N, p_1..p_N),

and everything else in the package is built on the real 2N x 2N generator M
constructed here.

Conventions frozen throughout the package:

* basis ordering is x-block first, p-block second;
* time evolution is qdot = M q, so stability means Re s < 0 for every
  eigenvalue s of M; spectra are often quoted as frequencies omega with
  s = -i*omega (see ``frequency_from_eigenvalue``);
* the detuning eps_j enters as xdot_j -= eps_j p_j, pdot_j += eps_j x_j.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .errors import CoalescentTransformError

OPEN = "open"
PERIODIC = "periodic"

#: |y| - 1 window treated as the coalescent (exceptional) boundary case.
COALESCENCE_TOL = 1e-12


def _as_tuple(values, n, name):
    if np.isscalar(values):
        values = [float(values)] * n
    out = tuple(float(v) for v in values)
    if len(out) != n:
        raise ValueError(f"{name} must have length {n}, got {len(out)}")
    if not all(math.isfinite(v) for v in out):
        raise ValueError(f"{name} entries must be finite")
    return out


@dataclass(frozen=True)
class ChainSpec:
    """Full parameterization of a generalized bosonic Kitaev chain.

    Parameters
    ----------
    n_sites:
        Number of modes N >= 1.
    hopping:
        Complex beamsplitter amplitude J (rad/s), identical on every link.
    squeezing:
        Complex two-mode-squeezing amplitude lam (rad/s), identical on
        every link.
    damping:
        Per-site energy decay rates gamma_j (rad/s), non-negative. A scalar
        is broadcast to all sites.
    detuning:
        Per-site rotating-frame detunings eps_j (rad/s). A scalar is
        broadcast; defaults to zero.
    boundary:
        "open" or "periodic". A single site cannot be closed on itself.
    """

    n_sites: int
    hopping: complex
    squeezing: complex
    damping: tuple[float, ...]
    detuning: tuple[float, ...]
    boundary: str = OPEN

    def __init__(self, n_sites, hopping, squeezing, damping, detuning=0.0, boundary=OPEN):
        n = int(n_sites)
        if n < 1:
            raise ValueError("n_sites must be >= 1")
        hopping = complex(hopping)
        squeezing = complex(squeezing)
        if not (cmath.isfinite(hopping) and cmath.isfinite(squeezing)):
            raise ValueError("hopping and squeezing must be finite")
        if boundary not in (OPEN, PERIODIC):
            raise ValueError(f"boundary must be '{OPEN}' or '{PERIODIC}', got {boundary!r}")
        if boundary == PERIODIC and n == 1:
            raise ValueError("a single site cannot carry a periodic boundary (self-link)")
        damping = _as_tuple(damping, n, "damping")
        if any(g < 0 for g in damping):
            raise ValueError("damping rates must be non-negative")
        detuning = _as_tuple(detuning, n, "detuning")
        object.__setattr__(self, "n_sites", n)
        object.__setattr__(self, "hopping", hopping)
        object.__setattr__(self, "squeezing", squeezing)
        object.__setattr__(self, "damping", damping)
        object.__setattr__(self, "detuning", detuning)
        object.__setattr__(self, "boundary", boundary)

    # -- constructors -----------------------------------------------------

    @classmethod
    def common_phase(
        cls,
        n_sites: int,
        hopping_magnitude: float,
        squeezing_magnitude: float,
        phase: float,
        damping,
        detuning=0.0,
        boundary: str = OPEN,
    ) -> "ChainSpec":
        """Chain with J = |J| e^{i phi} and lam = |lam| e^{i phi} (single phi)."""
        if hopping_magnitude < 0 or squeezing_magnitude < 0:
            raise ValueError("magnitudes must be non-negative")
        ph = cmath.exp(1j * phase)
        return cls(n_sites, hopping_magnitude * ph, squeezing_magnitude * ph,
                   damping, detuning, boundary)

    @classmethod
    def ep_family(cls, n_sites: int, gain: float, gamma: float,
                  detuning=0.0, boundary: str = OPEN) -> "ChainSpec":
        """Balanced chain J = lam = i*mu with per-link gain G = 4 mu / gamma."""
        if gain < 0:
            raise ValueError("gain must be non-negative")
        mu = gain * gamma / 4.0
        return cls(n_sites, 1j * mu, 1j * mu, gamma, detuning, boundary)

    # -- derived quantities ------------------------------------------------

    @property
    def periodic(self) -> bool:
        return self.boundary == PERIODIC

    @property
    def phase(self) -> float:
        """Common interaction phase phi = arg(J) = arg(lam).

        Raises ValueError when the two amplitudes carry different phases
        (the generalized chain studied here uses a single phi; zero
        amplitudes are phase-neutral).
        """
        if abs(self.hopping) == 0 and abs(self.squeezing) == 0:
            return 0.0
        if abs(self.hopping) == 0:
            return cmath.phase(self.squeezing)
        if abs(self.squeezing) == 0:
            return cmath.phase(self.hopping)
        pj, pl = cmath.phase(self.hopping), cmath.phase(self.squeezing)
        diff = (pj - pl + math.pi) % (2 * math.pi) - math.pi
        if abs(diff) > 1e-12:
            raise ValueError(
                f"hopping and squeezing phases differ by {diff:.3e}; no common phase"
            )
        return pj

    @property
    def uniform_damping(self) -> float:
        """The single damping rate gamma, or ValueError if non-uniform."""
        g0 = self.damping[0]
        if any(abs(g - g0) > 1e-12 * max(g0, 1.0) for g in self.damping):
            raise ValueError("damping is not uniform across the chain")
        return g0

    @property
    def gain(self) -> float:
        """Per-link gain G = 4 |lam| / gamma (uniform damping required)."""
        gamma = self.uniform_damping
        if gamma <= 0:
            raise ValueError("per-link gain requires positive damping")
        return 4.0 * abs(self.squeezing) / gamma

    def is_ep_family(self, tol: float = 1e-12) -> bool:
        """True for the balanced chain J = lam = i*mu with uniform damping."""
        try:
            self.uniform_damping
        except ValueError:
            return False
        j, l = self.hopping, self.squeezing
        scale = max(abs(j), abs(l), 1e-300)
        return (
            abs(j - l) <= tol * scale
            and abs(j.real) <= tol * scale
            and j.imag >= 0
        )

    def with_detuning(self, site: int, value: float) -> "ChainSpec":
        eps = list(self.detuning)
        eps[site] = float(value)
        return ChainSpec(self.n_sites, self.hopping, self.squeezing,
                         self.damping, tuple(eps), self.boundary)


@dataclass(frozen=True)
class DynamicalMatrix:
    """Real 2N x 2N generator of qdot = M q, x-block first."""

    matrix: NDArray
    spec: ChainSpec

    @property
    def order(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_sites(self) -> int:
        return self.spec.n_sites

    def block(self, row: str, col: str) -> NDArray:
        """One of the four N x N quadrature blocks, e.g. block('x', 'p')."""
        n = self.n_sites
        idx = {"x": slice(0, n), "p": slice(n, 2 * n)}
        return self.matrix[idx[row], idx[col]]


def _neighbour_masks(n: int, periodic: bool) -> tuple[NDArray, NDArray]:
    sub = np.zeros((n, n))
    sup = np.zeros((n, n))
    for j in range(n - 1):
        sub[j + 1, j] = 1.0
        sup[j, j + 1] = 1.0
    if periodic:
        sub[0, n - 1] = 1.0
        sup[n - 1, 0] = 1.0
    return sub, sup


def build_dynamical_matrix(spec: ChainSpec) -> DynamicalMatrix:
    """Construct the real-space quadrature generator M for a chain spec.

    For general complex J and lam the Heisenberg equations of
    a_j give, per quadrature and neighbour,

        xdot_m = -gamma_m/2 x_m + (Im J + Im lam) x_{m-1} + (Im lam - Im J) x_{m+1}
                 + (Re J - Re lam)(p_{m-1} + p_{m+1}) - eps_m p_m
        pdot_m = -gamma_m/2 p_m - (Re J + Re lam)(x_{m-1} + x_{m+1})
                 + (Im J - Im lam) p_{m-1} - (Im J + Im lam) p_{m+1} + eps_m x_m

    with the periodic boundary adding the N<->1 link with identical
    amplitudes. For the balanced imaginary case J = lam = i*mu this reduces
    to two decoupled copies of an asymmetric-hopping (Hatano-Nelson) chain:
    x amplifies rightward at rate 2*mu, p leftward.
    """
    n = spec.n_sites
    jr, ji = spec.hopping.real, spec.hopping.imag
    lr, li = spec.squeezing.real, spec.squeezing.imag
    sub, sup = _neighbour_masks(n, spec.periodic)
    gamma = np.diag(spec.damping)
    eps = np.diag(spec.detuning)

    m_xx = -gamma / 2 + (ji + li) * sub + (li - ji) * sup
    m_xp = (jr - lr) * (sub + sup) - eps
    m_px = -(jr + lr) * (sub + sup) + eps
    m_pp = -gamma / 2 + (ji - li) * sub - (ji + li) * sup

    m = np.block([[m_xx, m_xp], [m_px, m_pp]])
    if not np.all(np.isfinite(m)):
        raise ValueError("dynamical matrix has non-finite entries")
    return DynamicalMatrix(matrix=m, spec=spec)


def bloch_matrix(spec: ChainSpec, k: float) -> NDArray:
    """2x2 Bloch generator at wavevector k in the (a_k, a_-k^dag) basis.

    Valid for zero detuning, uniform damping, and a common interaction
    phase phi. The convention is alpha_dot_k = -i * B(k) alpha_k, i.e. the
    eigenvalues of B(k) are the complex band frequencies omega(k) with
    dynamical eigenvalues s = -i*omega:

        B(k) = [[-i g/2 + 2|J| cos(k+phi),   2 e^{i phi} |lam| cos k],
                [-2 e^{-i phi} |lam| cos k, -i g/2 - 2|J| cos(phi-k)]]
    """
    if any(abs(e) > 0 for e in spec.detuning):
        raise ValueError("Bloch matrix requires zero detuning")
    gamma = spec.uniform_damping
    phi = spec.phase
    mj, ml = abs(spec.hopping), abs(spec.squeezing)
    return np.array(
        [
            [-0.5j * gamma + 2 * mj * np.cos(k + phi), 2 * np.exp(1j * phi) * ml * np.cos(k)],
            [-2 * np.exp(-1j * phi) * ml * np.cos(k), -0.5j * gamma - 2 * mj * np.cos(phi - k)],
        ]
    )


def bloch_matrix_from_real_space(spec: ChainSpec, k: float) -> NDArray:
    """Bloch generator obtained by Fourier-transforming the real-space M.

    Independent cross-check of ``bloch_matrix``: reads the on-site and
    hopping coefficient blocks out of the periodic real-space matrix, forms
    the symbol sum_n C_n e^{ikn} (n = +1 for the j-1 -> j hop), and rotates
    it to the (a, a^dag) basis. Requires N >= 3 so the neighbour blocks are
    distinct.
    """
    if not spec.periodic:
        raise ValueError("real-space Bloch cross-check requires a periodic chain")
    n = spec.n_sites
    if n < 3:
        raise ValueError("need N >= 3 to separate neighbour blocks")
    m = build_dynamical_matrix(spec).matrix

    def coeff_block(offset: int, row: int = 1) -> NDArray:
        col = (row - offset) % n
        return np.array(
            [[m[row, col], m[row, n + col]], [m[n + row, col], m[n + row, n + col]]]
        )

    symbol = sum(coeff_block(d) * np.exp(1j * k * d) for d in (-1, 0, 1))
    u = np.array([[1.0, 1.0j], [1.0, -1.0j]]) / np.sqrt(2.0)
    return 1j * (u @ symbol @ np.linalg.inv(u))


def quadrature_to_mode_basis(matrix: NDArray) -> NDArray:
    """Conjugate a 2N x 2N quadrature-basis operator into the (a, a*) basis."""
    n2 = matrix.shape[0]
    n = n2 // 2
    u = np.array([[1.0, 1.0j], [1.0, -1.0j]]) / np.sqrt(2.0)
    eye = np.eye(n)
    big_u = np.block([[eye * u[0, 0], eye * u[0, 1]], [eye * u[1, 0], eye * u[1, 1]]])
    return big_u @ matrix @ np.linalg.inv(big_u)


OPEN_GAP = "open-gap"
CLOSED_GAP = "closed-gap"


@dataclass(frozen=True)
class LocalQuadratureTransform:
    """Site-local 2x2 transform that diagonalizes the Bloch generator.

    The columns are the k-independent eigenvectors of the Bloch matrix;
    their k-independence is what makes the transform local and lets the
    general-phi chain be mapped onto the phi = pi/2 one. ``case`` is
    "open-gap" (|y| < 1, parameterized by eta with cos eta = y) or
    "closed-gap" (|y| > 1, cosh xi = |y|), with y = |J/lam| cos phi.
    """

    matrix: NDArray
    case: str
    y: float
    eta: Optional[float]
    xi: Optional[float]

    @property
    def parity_intertwiner(self) -> NDArray:
        """2x2 W with B(k + pi/2) W = W B(-k + pi/2) for every k.

        Built from the eigenvector matrix as V sigma_x V^{-1}; in closed
        form W = [[-1, -2 y e^{i phi}], [0, 1]] with the phase taken from
        the first eigenvector component.
        """
        v = self.matrix
        sx = np.array([[0.0, 1.0], [1.0, 0.0]])
        return v @ sx @ np.linalg.inv(v)


def local_quadrature_transform(spec: ChainSpec) -> LocalQuadratureTransform:
    """Closed-form local eigenvector pair of the Bloch generator.

    With y = |J/lam| cos phi and r = sqrt(y^2 - 1) the (unnormalized)
    columns are (e^{i phi}(-y +/- r), 1)^T; each returned column has unit
    Euclidean norm. The boundary |y| = 1, where both columns coalesce, is
    reported as ``CoalescentTransformError`` instead of returning a
    defective matrix.
    """
    if any(abs(e) > 0 for e in spec.detuning):
        raise ValueError("local transform requires zero detuning")
    mj, ml = abs(spec.hopping), abs(spec.squeezing)
    if mj == 0 and ml == 0:
        raise ValueError("local transform undefined for an uncoupled chain")
    phi = spec.phase
    if ml == 0:
        y = math.inf
    else:
        y = (mj / ml) * math.cos(phi)
    if abs(abs(y) - 1.0) <= COALESCENCE_TOL:
        raise CoalescentTransformError(
            f"eigenvectors coalesce at |y| = 1 (y = {y:.15g}); the transform is defective"
        )
    if not math.isfinite(y):
        raise CoalescentTransformError("zero squeezing: y diverges and the pair degenerates")
    r = cmath.sqrt(y * y - 1.0)
    ph = cmath.exp(1j * phi)
    plus = np.array([ph * (-y + r), 1.0])
    minus = np.array([ph * (-y - r), 1.0])
    plus = plus / np.linalg.norm(plus)
    minus = minus / np.linalg.norm(minus)
    if abs(y) < 1.0:
        case, eta, xi = OPEN_GAP, math.acos(y), None
    else:
        case, eta, xi = CLOSED_GAP, None, math.acosh(abs(y))
    return LocalQuadratureTransform(
        matrix=np.column_stack([plus, minus]), case=case, y=y, eta=eta, xi=xi
    )


def eigenvalue_from_frequency(omega: complex) -> complex:
    """Dynamical eigenvalue s = -i*omega for a band frequency omega."""
    return -1j * omega


def frequency_from_eigenvalue(s: complex) -> complex:
    """Band frequency omega = i*s for a dynamical eigenvalue s."""
    return 1j * s
