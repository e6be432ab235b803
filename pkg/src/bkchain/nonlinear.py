"""Optomechanical nonlinearity: Duffing coefficients, RWA catalog, simulations.

The parametric couplings of the chain come from intensity-modulating the
radiation pressure of a cavity whose Lorentzian response h(u) = 1/(1+u^2)
is sampled at u = 2(Delta + sum_j g0_j z_j)/kappa. At the maximum-spring-
shift detuning Delta = +/- kappa/(2 sqrt 3) the quadratic term of the force
expansion vanishes (h'' = 0) and the leading nonlinearity is cubic,

    zddot_i = -omega_i^2 z_i - gamma_i zdot_i - sum_{j} t_ij(t) z_j
              - (n(t)/n_max) sum_{jkl} alpha_{ijkl} z_j z_k z_l,

with t_ij(t) the tone-modulated cross-spring (the source of the
beamsplitter and squeezing couplings) and

    alpha_{ijkl} = -sign(Delta) 6 sqrt(3) omega_i nbar_c
                   g0_i g0_j g0_k g0_l / kappa^3,

so a red..blue choice of Delta > 0 gives a softening nonlinearity. For a
single mode this reduces to the Duffing coefficient
alpha = -6 omega deltaomega g0^2/kappa^2 and an amplitude-dependent
frequency pull delta_nl = -deltaomega (9 g0^2 / 4 kappa^2) A^2.

Two simulation routes are provided and must agree on their common domain:

* ``fullband``: direct integration of the laboratory-frame equation above,
  resolving every carrier and modulation period;
* ``envelope``: rotating-frame amplitudes a_j (z_j = (a_j e^{i omega_j t}
  + c.c.)/sqrt 2) evolving under the chain's linear generator plus the
  secular cubic terms enumerated by ``build_rwa_catalog``.

The catalog keeps exactly the degeneracy classes 1-4 of the quartic
interaction (self-Kerr; population-assisted coupling/squeezing corrections,
i.e. gain saturation; cross-Kerr and spring corrections; tone-assisted
three-body terms) and provably nothing with four distinct indices as long
as the mode frequencies are incommensurate.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .chain import ChainSpec
from .errors import CommensurateFrequencyError, NotSettledError, OffMagicDetuningError
from .numerics import Trajectory, integrate_ivp

MAGIC_U = 1.0 / math.sqrt(3.0)

#: omega/kappa ratio beyond which the bad-cavity (adiabatic) model is suspect.
BAD_CAVITY_WARN_RATIO = 0.2


def lorentzian(u: float) -> float:
    """Cavity response h(u) = 1 / (1 + u^2)."""
    return 1.0 / (1.0 + u * u)


def lorentzian_d1(u: float) -> float:
    return -2.0 * u / (1.0 + u * u) ** 2


def lorentzian_d2(u: float) -> float:
    return (6.0 * u * u - 2.0) / (1.0 + u * u) ** 3


def lorentzian_d3(u: float) -> float:
    return 24.0 * u * (1.0 - u * u) / (1.0 + u * u) ** 4


@dataclass(frozen=True)
class OptomechanicalParams:
    """Hardware description of the modulated-cavity platform.

    ``mode_frequencies`` are the operating (static-spring-included)
    resonance frequencies omega_j in rad/s; ``vacuum_couplings`` the
    single-photon rates g0_j; ``cavity_linewidth`` kappa; ``detuning`` the
    mean laser-cavity detuning Delta (defaults to the magic value
    +kappa/(2 sqrt 3)); ``max_photon_number`` the on-resonance circulating
    photon number n_max. Displacements are measured in zero-point units
    (z = x / x_zpf).
    """

    mode_frequencies: tuple[float, ...]
    vacuum_couplings: tuple[float, ...]
    cavity_linewidth: float
    detuning: Optional[float] = None
    max_photon_number: float = 1.0

    def __post_init__(self):
        freqs = tuple(float(w) for w in self.mode_frequencies)
        g0 = tuple(float(g) for g in self.vacuum_couplings)
        if len(freqs) != len(g0):
            raise ValueError("mode_frequencies and vacuum_couplings must have equal length")
        if any(w <= 0 for w in freqs):
            raise ValueError("mode frequencies must be positive")
        if self.cavity_linewidth <= 0:
            raise ValueError("cavity linewidth must be positive")
        object.__setattr__(self, "mode_frequencies", freqs)
        object.__setattr__(self, "vacuum_couplings", g0)
        if self.detuning is None:
            object.__setattr__(self, "detuning", self.cavity_linewidth / (2.0 * math.sqrt(3.0)))
        if max(freqs) / self.cavity_linewidth > BAD_CAVITY_WARN_RATIO:
            warnings.warn(
                "mode frequency is a sizeable fraction of the cavity linewidth; "
                "the adiabatic (bad-cavity) force model is questionable",
                stacklevel=2,
            )

    @property
    def n_modes(self) -> int:
        return len(self.mode_frequencies)

    @property
    def u0(self) -> float:
        """Dimensionless operating point u0 = 2 Delta / kappa."""
        return 2.0 * self.detuning / self.cavity_linewidth

    @property
    def cavity_population(self) -> float:
        """Mean circulating photon number nbar_c = n_max h(u0)."""
        return self.max_photon_number * lorentzian(self.u0)

    def enhanced_coupling(self, mode: int) -> float:
        """Field-enhanced coupling g_j = sqrt(nbar_c) g0_j."""
        return math.sqrt(self.cavity_population) * self.vacuum_couplings[mode]

    def spring_shift(self, mode: int) -> float:
        """Static optical spring shift deltaomega_j = 2 g_j^2 Delta / (Delta^2 + kappa^2/4)."""
        g = self.enhanced_coupling(mode)
        return 2.0 * g * g * self.detuning / (self.detuning**2 + self.cavity_linewidth**2 / 4.0)

    def at_magic_detuning(self, tol: float = 1e-9) -> bool:
        return abs(abs(self.u0) - MAGIC_U) <= tol

    def require_magic_detuning(self) -> None:
        if not self.at_magic_detuning():
            h2 = lorentzian_d2(self.u0)
            raise OffMagicDetuningError(
                f"cubic-only expansion needs Delta = +/- kappa/(2 sqrt 3); "
                f"here h''(u0) = {h2:.6g} != 0",
                h2=h2,
            )

    def alpha_force(self, i: int, j: int, k: int, l: int) -> float:
        """Cubic force coefficient alpha_{ijkl} (laboratory frame, z units).

        alpha_{ijkl} = -sign(Delta) 6 sqrt(3) omega_i nbar_c
        g0_i g0_j g0_k g0_l / kappa^3; softening for Delta > 0.
        """
        self.require_magic_detuning()
        g0 = self.vacuum_couplings
        return (
            -math.copysign(6.0 * math.sqrt(3.0), self.detuning)
            * self.mode_frequencies[i]
            * self.cavity_population
            * g0[i] * g0[j] * g0[k] * g0[l]
            / self.cavity_linewidth**3
        )


def duffing_coefficient(params: OptomechanicalParams, mode: int) -> float:
    """Single-mode Duffing coefficient alpha = -6 omega deltaomega g0^2 / kappa^2.

    Only defined at the magic detuning, where the quadratic force term
    vanishes; elsewhere the cubic-only expansion is invalid and the call is
    rejected with the offending h'' value. Equivalently
    alpha = -(8/3) omega g0^4 n_max h'''(u0) / kappa^3 in terms of the
    numeric third derivative of the cavity response (the sign follows the
    zddot = ... - alpha z^3 convention).
    """
    params.require_magic_detuning()
    omega = params.mode_frequencies[mode]
    g0 = params.vacuum_couplings[mode]
    return -6.0 * omega * params.spring_shift(mode) * g0**2 / params.cavity_linewidth**2


def nl_frequency_shift(params: OptomechanicalParams, mode: int, amplitude: float) -> float:
    """Amplitude-dependent frequency pull delta_nl = -deltaomega (9 g0^2/4 kappa^2) A^2.

    Harmonic-balance result for the Duffing oscillator at oscillation
    amplitude A (zero-point units); it counteracts the static spring. A
    validity warning is emitted once g0 A / kappa exceeds 0.3 (the
    oscillation then explores the full Lorentzian, not just its cubic
    Taylor term).
    """
    g0 = params.vacuum_couplings[mode]
    if g0 * abs(amplitude) / params.cavity_linewidth > 0.3:
        warnings.warn("g0*A/kappa > 0.3: amplitude outside the cubic-expansion regime",
                      stacklevel=2)
    return (
        -params.spring_shift(mode)
        * (9.0 * g0**2 / (4.0 * params.cavity_linewidth**2))
        * amplitude**2
    )


# ---------------------------------------------------------------------------
# RWA term catalog
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RwaTerm:
    """One secular term of the rotating-frame cubic force.

    ``monomial`` is the classical envelope monomial feeding
    d a_{target}/dt, as ((mode, conjugated), ...) factors;
    ``envelope_coefficient`` its complex rate. ``h_pattern`` and
    ``h_prefactor`` record the normal-ordered interaction monomial the term
    descends from and the printed fraction of alpha it carries (6/16 for
    the self-Kerr, 3/16 for threefold degeneracy, and so on).
    ``ordering_remnant`` marks single-quantum normal-ordering remnants
    (e.g. the class-1 linear shift) that a mean-field integration omits.
    """

    target_mode: int
    monomial: tuple[tuple[int, bool], ...]
    envelope_coefficient: complex
    degeneracy_class: int
    tone: Optional[str]
    alpha: float
    h_prefactor: float
    h_pattern: str
    ordering_remnant: bool = False


@dataclass(frozen=True)
class RwaTermCatalog:
    """All secular cubic terms for a mode set and tone set."""

    terms: tuple[RwaTerm, ...]
    params: OptomechanicalParams

    def for_mode(self, mode: int) -> tuple[RwaTerm, ...]:
        return tuple(t for t in self.terms if t.target_mode == mode)

    def classes_present(self) -> set[int]:
        return {t.degeneracy_class for t in self.terms}


_CLASS_PREFACTOR = {1: 6.0 / 16.0, 2: 3.0 / 16.0, 3: 2.0 / 16.0, 4: 1.0 / 16.0}


def _degeneracy_class(indices: tuple[int, int, int, int]) -> int:
    counts = sorted((indices.count(m) for m in set(indices)), reverse=True)
    return {(4,): 1, (3, 1): 2, (2, 2): 3, (2, 1, 1): 4, (1, 1, 1, 1): 5}[tuple(counts)]


def _h_pattern(target: int, monomial) -> str:
    """Normal-ordered parent interaction monomial of a force term.

    The force on a_target is the a*_target derivative of the interaction,
    so the parent is the target's creation operator times the monomial
    factors themselves (conjugated factors are creation operators)."""
    ops = [(target, True)] + [(m, c) for (m, c) in monomial]
    ops.sort(key=lambda mc: (not mc[1], mc[0]))
    return " ".join(f"a†[{m}]" if dag else f"a[{m}]" for m, dag in ops)


def _tone_signature(tone, sign: int, omegas: NDArray) -> NDArray:
    """Integer coefficients of the tone frequency over the mode frequencies."""
    coeff = np.zeros(omegas.size, dtype=int)
    j, k = tone.pair
    if tone.kind == "TMS":
        coeff[j] += sign
        coeff[k] += sign
    else:  # BS at |omega_k - omega_j|
        hi, lo = (k, j) if omegas[k] >= omegas[j] else (j, k)
        coeff[hi] += sign
        coeff[lo] -= sign
    return coeff


def build_rwa_catalog(
    params: OptomechanicalParams,
    tones: Sequence = (),
    frequency_tol: Optional[float] = None,
) -> RwaTermCatalog:
    """Enumerate the secular cubic terms for the given tone set.

    Every combination of three signed envelope factors and at most one
    modulation-tone sideband is tested for a vanishing rotating-frame
    frequency mismatch. Matches whose integer frequency signature cancels
    identically are genuine class 1-4 terms; a match that relies on an
    accidental integer relation among the mode frequencies (including any
    four-distinct-index term, class 5) rejects the input with that
    relation.
    """
    params.require_magic_detuning()
    n = params.n_modes
    omegas = np.asarray(params.mode_frequencies)
    if frequency_tol is None:
        frequency_tol = 1e-8 * float(omegas.max())
    # signed envelope factors: (mode, conjugated) contributes +/- omega_mode
    factor_options = [(m, False) for m in range(n)] + [(m, True) for m in range(n)]
    tone_options: list[tuple[Optional[object], int]] = [(None, 0)]
    for tone in tones:
        tone_options.append((tone, +1))
        tone_options.append((tone, -1))

    terms: list[RwaTerm] = []
    for i in range(n):
        for triple in combinations_with_replacement(factor_options, 3):
            net = np.zeros(n, dtype=int)
            net[i] -= 1
            for m, conj in triple:
                net[m] += -1 if conj else +1
            for tone, sign in tone_options:
                coeff_vec = net.copy()
                if tone is not None:
                    coeff_vec += _tone_signature(tone, sign, omegas)
                mismatch = float(coeff_vec @ omegas)
                if abs(mismatch) > frequency_tol:
                    continue
                indices = (i,) + tuple(m for m, _ in triple)
                cls = _degeneracy_class(indices)
                structural = not np.any(coeff_vec)
                expected_tone = (cls in (2, 4))
                if (not structural) or cls == 5 or (tone is None) == expected_tone:
                    raise CommensurateFrequencyError(
                        "mode frequencies satisfy an accidental integer relation "
                        f"{coeff_vec.tolist()} . omega = 0 (class {cls} term)",
                        relation=tuple(coeff_vec.tolist()),
                    )
                # multiplicity of the ordered signed product
                mult = math.factorial(3)
                for opt in set(triple):
                    mult //= math.factorial(triple.count(opt))
                alpha = params.alpha_force(*indices)
                tone_factor = 1.0 + 0.0j
                label = None
                if tone is not None:
                    tone_factor = 0.5 * tone.depth * cmath.exp(1j * sign * tone.phase)
                    label = f"{tone.kind}({tone.pair[0]},{tone.pair[1]})"
                coeff = 1j * alpha * mult * tone_factor / (4.0 * omegas[i])
                terms.append(RwaTerm(
                    target_mode=i,
                    monomial=tuple(triple),
                    envelope_coefficient=complex(coeff),
                    degeneracy_class=cls,
                    tone=label,
                    alpha=alpha,
                    h_prefactor=_CLASS_PREFACTOR[cls],
                    h_pattern=_h_pattern(i, triple),
                    ordering_remnant=False,
                ))
        # class-1 normal-ordering remnant: the single-quantum linear shift
        alpha = params.alpha_force(i, i, i, i)
        terms.append(RwaTerm(
            target_mode=i,
            monomial=((i, False),),
            envelope_coefficient=complex(1j * alpha * (12.0 / 16.0) / omegas[i]),
            degeneracy_class=1,
            tone=None,
            alpha=alpha,
            h_prefactor=12.0 / 16.0,
            h_pattern=f"a†[{i}] a[{i}]",
            ordering_remnant=True,
        ))
    return RwaTermCatalog(terms=tuple(terms), params=params)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoherentDrive:
    """Resonant drive: adds ``amplitude`` to da_mode/dt (envelope units)."""

    mode: int
    amplitude: complex


@dataclass(frozen=True)
class NoiseDrive:
    """Qualitative thermal forcing: per-step complex Gaussian kicks of
    standard deviation strength*sqrt(dt) on every envelope."""

    strength: float
    seed: int = 0


def _linear_envelope_matrices(spec: ChainSpec) -> tuple[NDArray, NDArray]:
    """da/dt = A a + B conj(a) for the ideal chain in the rotating frame."""
    n = spec.n_sites
    sub = np.zeros((n, n))
    sup = np.zeros((n, n))
    for j in range(n - 1):
        sub[j + 1, j] = 1.0
        sup[j, j + 1] = 1.0
    if spec.periodic:
        sub[0, n - 1] = 1.0
        sup[n - 1, 0] = 1.0
    j_amp, l_amp = spec.hopping, spec.squeezing
    a = (
        -0.5 * np.diag(spec.damping)
        + 1j * np.diag(spec.detuning)
        - 1j * (j_amp * sub + np.conj(j_amp) * sup)
    )
    b = -1j * l_amp * (sub + sup)
    return a, b


def envelope_to_quadratures(a: NDArray) -> NDArray:
    """Map complex envelopes to the (x, p) vector: x = sqrt2 Re a, p = sqrt2 Im a."""
    a = np.asarray(a)
    return np.concatenate([math.sqrt(2.0) * a.real, math.sqrt(2.0) * a.imag], axis=-1)


def quadratures_to_envelope(q: NDArray) -> NDArray:
    q = np.asarray(q)
    n = q.shape[-1] // 2
    return (q[..., :n] + 1j * q[..., n:]) / math.sqrt(2.0)


def envelope_to_fullband_state(a: NDArray, params: OptomechanicalParams) -> NDArray:
    """Laboratory-frame (z, zdot) at t = 0 for given envelopes."""
    omegas = np.asarray(params.mode_frequencies)
    z = math.sqrt(2.0) * np.real(a)
    zdot = -math.sqrt(2.0) * omegas * np.imag(a)
    return np.concatenate([z, zdot])


def demodulate(traj: Trajectory, params: OptomechanicalParams) -> Trajectory:
    """Extract rotating-frame envelopes a_j(t) from a fullband trajectory.

    Exact for a pure carrier: a_j = e^{-i omega_j t} (omega_j z_j - i zdot_j)
    / (sqrt 2 omega_j); residual counter-rotating ripple is of order
    coupling/omega.
    """
    omegas = np.asarray(params.mode_frequencies)
    n = omegas.size
    z = traj.states[:, :n]
    zdot = traj.states[:, n:]
    phases = np.exp(-1j * np.outer(traj.times, omegas))
    env = phases * (omegas * z - 1j * zdot) / (math.sqrt(2.0) * omegas)
    return Trajectory(times=traj.times, states=env, status=traj.status,
                      metadata={**traj.metadata, "demodulated": True})


def _compile_link_tones(spec: ChainSpec, params: OptomechanicalParams):
    from .tones import compile_tones  # deferred: tones depends on this module

    return compile_tones(spec, params)


def _tone_amplitude_matrix(params: OptomechanicalParams, tone) -> NDArray:
    """Cross-spring amplitude T_ij of one tone in -sum_j T_ij cos(...) z_j."""
    n = params.n_modes
    t = np.zeros((n, n))
    j, k = tone.pair
    prefactor = (
        -4.0
        * lorentzian_d1(params.u0)
        * params.max_photon_number
        * tone.depth
        / params.cavity_linewidth
    )
    g0 = params.vacuum_couplings
    w = params.mode_frequencies
    t[j, k] = prefactor * w[j] * g0[j] * g0[k]
    t[k, j] = prefactor * w[k] * g0[k] * g0[j]
    return t


def simulate(
    spec: ChainSpec,
    params: OptomechanicalParams,
    drive=None,
    t_span: tuple[float, float] = (0.0, 1.0),
    mode: str = "envelope",
    initial: Optional[NDArray] = None,
    include_nonlinearity: bool = True,
    step: Optional[float] = None,
    record_every: int = 1,
    blow_up: float = 1e9,
) -> Trajectory:
    """Integrate the chain dynamics in either representation.

    ``envelope``: complex amplitudes under the chain's linear generator
    plus the secular cubic forces of the RWA catalog (mean-field; ordering
    remnants excluded). ``fullband``: laboratory-frame (z, zdot) under the
    tone-modulated cross-spring and the full cubic force; the step must
    resolve the fastest carrier (default: fastest period / 64). With
    ``include_nonlinearity=False`` both reduce to the linear chain, and
    the demodulated fullband trajectory matches the envelope one to the
    rotating-wave accuracy O(coupling/omega).

    Divergence (state norm exceeding ``blow_up``) terminates the run with
    trajectory status "diverged": for the linear model this is the signal
    of dynamical instability; with a softening nonlinearity the same
    parameters instead settle to a bounded limit cycle.
    """
    if params.n_modes != spec.n_sites:
        raise ValueError("hardware mode count must match the chain length")
    if mode not in ("envelope", "fullband"):
        raise ValueError("mode must be 'envelope' or 'fullband'")

    n = spec.n_sites
    coherent = [d for d in (drive or []) if isinstance(d, CoherentDrive)] if drive else []
    noise = [d for d in (drive or []) if isinstance(d, NoiseDrive)] if drive else []
    if noise and mode != "envelope":
        raise ValueError("noise forcing is implemented for the envelope route only")

    if mode == "envelope":
        a_mat, b_mat = _linear_envelope_matrices(spec)
        drive_vec = np.zeros(n, dtype=complex)
        for d in coherent:
            drive_vec[d.mode] += d.amplitude
        if include_nonlinearity:
            catalog = build_rwa_catalog(params, _compile_link_tones(spec, params).tones)
            live = [t for t in catalog.terms if not t.ordering_remnant]
            targets = np.array([t.target_mode for t in live], dtype=int)
            coeffs = np.array([t.envelope_coefficient for t in live])
            fidx = np.array([[m for m, _ in t.monomial] for t in live], dtype=int)
            fconj = np.array([[c for _, c in t.monomial] for t in live], dtype=bool)
        else:
            live = []

        def rhs(t, a):
            out = a_mat @ a + b_mat @ np.conj(a) + drive_vec
            if live:
                vals = a[fidx]
                vals = np.where(fconj, np.conj(vals), vals)
                np.add.at(out, targets, coeffs * vals.prod(axis=1))
            return out

        y0 = np.zeros(n, dtype=complex) if initial is None else np.asarray(initial, dtype=complex)
        rate = max(
            max(spec.damping),
            abs(spec.hopping), abs(spec.squeezing),
            max(abs(e) for e in spec.detuning),
            1e-300,
        )
        h = step if step is not None else 0.02 / rate
        if noise:
            return _integrate_with_noise(rhs, y0, t_span, h, noise[0], record_every, blow_up)
        traj = integrate_ivp(rhs, y0, t_span, h, blow_up=blow_up, record_every=record_every)
        traj.metadata.update(mode="envelope", n_modes=n)
        return traj

    # fullband
    schedule = _compile_link_tones(spec, params)
    omegas = np.asarray(params.mode_frequencies)
    gammas = np.asarray(spec.damping)
    g0 = np.asarray(params.vacuum_couplings)
    tone_mats = [_tone_amplitude_matrix(params, tone) for tone in schedule.tones]
    tone_freqs = np.array([tone.frequency for tone in schedule.tones])
    tone_phases = np.array([tone.phase for tone in schedule.tones])
    tone_depths = np.array([tone.depth for tone in schedule.tones])
    if include_nonlinearity:
        params.require_magic_detuning()
        alpha0 = -math.copysign(6.0 * math.sqrt(3.0), params.detuning) * \
            params.cavity_population / params.cavity_linewidth**3
    # F cos(omega_i t + psi) reproducing da/dt += amplitude per coherent drive
    force_c = np.zeros(n, dtype=complex)
    for d in coherent:
        force_c[d.mode] += 2.0 * math.sqrt(2.0) * omegas[d.mode] * (1j * complex(d.amplitude))
    force_amp = np.abs(force_c)
    force_phase = np.angle(force_c)

    def rhs(t, y):
        z = y[:n]
        zd = y[n:]
        acc = -(omegas**2) * z - gammas * zd
        if tone_mats:
            mods = np.cos(tone_freqs * t + tone_phases)
            for c, mat in zip(mods, tone_mats):
                acc = acc - c * (mat @ z)
        if include_nonlinearity:
            envelope_mod = 1.0 + float(np.sum(tone_depths * np.cos(tone_freqs * t + tone_phases)))
            w = float(g0 @ z)
            acc = acc - (alpha0 * envelope_mod * w**3) * (omegas * g0)
        if force_amp.any():
            acc = acc + force_amp * np.cos(omegas * t + force_phase)
        return np.concatenate([zd, acc])

    if initial is None:
        y0 = np.zeros(2 * n)
    elif np.iscomplexobj(np.asarray(initial)) or np.asarray(initial).shape == (n,):
        y0 = envelope_to_fullband_state(np.asarray(initial, dtype=complex), params)
    else:
        y0 = np.asarray(initial, dtype=float)
    fastest = max(float(omegas.max()), float(tone_freqs.max()) if tone_freqs.size else 0.0)
    h = step if step is not None else 2.0 * math.pi / fastest / 64.0
    if h > 2.0 * math.pi / fastest / 50.0:
        raise ValueError("fullband step must resolve the fastest period (step <= period/50)")
    traj = integrate_ivp(rhs, y0, t_span, h, blow_up=blow_up, record_every=record_every)
    traj.metadata.update(mode="fullband", n_modes=n,
                         mode_frequencies=tuple(params.mode_frequencies))
    return traj


def _integrate_with_noise(rhs, y0, t_span, step, noise: NoiseDrive, record_every, blow_up):
    """Fixed-step RK4 with additive per-step Gaussian kicks (qualitative)."""
    rng = np.random.default_rng(noise.seed)
    t0, t1 = t_span
    n_steps = int(math.ceil((t1 - t0) / step))
    y = np.array(y0, dtype=complex)
    times = [t0]
    states = [y.copy()]
    status = "completed"
    t = t0
    sigma = noise.strength * math.sqrt(step)
    for i in range(n_steps):
        h = min(step, t1 - t)
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h * k1 / 2)
        k3 = rhs(t + h / 2, y + h * k2 / 2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        y = y + sigma * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)) / math.sqrt(2)
        t = t0 + (i + 1) * step if t + h < t1 else t1
        if not np.isfinite(np.linalg.norm(y)) or np.linalg.norm(y) > blow_up:
            status = "diverged"
            break
        if (i + 1) % record_every == 0 or t >= t1:
            times.append(t)
            states.append(y.copy())
    return Trajectory(np.array(times), np.array(states), status,
                      {"integrator": "rk4+noise", "step": step, "mode": "envelope",
                       "seed": noise.seed})


# ---------------------------------------------------------------------------
# Trajectory analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SaturationMetrics:
    """Steady-oscillation summary of a settled trajectory."""

    amplitude: float
    per_mode_amplitude: NDArray
    frequency: float
    settling_time: float


def _spectral_peak(signal: NDArray, dt: float) -> float:
    """Dominant frequency of a (complex or real) signal via a Hann-windowed
    FFT peak with parabolic refinement; rad/s, signed for complex input.

    Real signals have their mean removed (a DC offset is not an
    oscillation); complex envelopes keep theirs, since a slow rotating-frame
    drift is exactly the frequency of interest."""
    sig = np.asarray(signal)
    if np.isrealobj(sig):
        sig = sig - sig.mean()
    window = np.hanning(sig.size)
    spec = np.fft.fft(sig * window)
    freqs = np.fft.fftfreq(sig.size, d=dt) * 2.0 * math.pi
    mag = np.abs(spec)
    if np.isrealobj(signal):
        half = sig.size // 2
        mag = mag[:half]
        freqs = freqs[:half]
    peak = int(np.argmax(mag))
    if 0 < peak < mag.size - 1 and mag[peak] > 0:
        lm, l0, lp = (math.log(mag[peak - 1] + 1e-300),
                      math.log(mag[peak] + 1e-300),
                      math.log(mag[peak + 1] + 1e-300))
        denom = lm - 2.0 * l0 + lp
        shift = 0.5 * (lm - lp) / denom if denom != 0 else 0.0
        df = freqs[1] - freqs[0]
        return float(freqs[peak] + shift * df)
    return float(freqs[peak])


def saturation_metrics(traj: Trajectory, drift_tol: float = 0.01) -> SaturationMetrics:
    """Steady amplitude, oscillation frequency, and settling time.

    The analysis window is the final 20% of the trajectory; the run is
    "settled" when the window's first- and second-half RMS amplitudes agree
    within ``drift_tol`` (relative). Diverged or still-drifting
    trajectories raise NotSettledError. The frequency is the discrete
    spectral peak of the dominant mode over the window: for envelope
    trajectories that is the rotating-frame shift, for fullband ones the
    absolute oscillation frequency.
    """
    if traj.status == "diverged":
        raise NotSettledError("trajectory diverged; no steady oscillation")
    n_window = max(traj.times.size // 5, 8)
    if traj.times.size < 2 * n_window:
        raise NotSettledError("trajectory too short for a settled window")
    fullband = traj.metadata.get("mode") == "fullband"
    if fullband:
        nm = traj.metadata["n_modes"]
        comps = traj.states[:, :nm] * math.sqrt(2.0)  # sqrt2 * RMS = oscillation amplitude
    else:
        comps = traj.states
    mags = np.abs(comps)
    window = mags[-n_window:]
    per_mode = np.sqrt((window**2).mean(axis=0))
    overall = float(np.linalg.norm(per_mode))
    peak = float(np.sqrt((mags**2).sum(axis=1)).max())
    if overall <= 1e-6 * max(peak, 1e-300):
        # fully decayed: settled at (numerically) zero amplitude
        return SaturationMetrics(overall, per_mode, 0.0, float(traj.times[-n_window]))
    half = n_window // 2
    a1 = float(np.sqrt((window[:half] ** 2).sum(axis=1).mean()))
    a2 = float(np.sqrt((window[half:] ** 2).sum(axis=1).mean()))
    drift = abs(a2 - a1) / overall
    if drift >= drift_tol:
        raise NotSettledError(
            f"amplitude drift {drift:.3%} over the final window exceeds {drift_tol:.0%}"
        )
    dominant = int(np.argmax(per_mode))
    dt = float(traj.times[-1] - traj.times[-2])
    signal = traj.states[-n_window:, dominant]
    freq = _spectral_peak(signal.real if fullband else signal, dt)
    # settling time: last moment the total amplitude leaves the steady band
    series = np.sqrt((mags**2).sum(axis=1))
    target = float(series[-n_window:].mean())
    outside = np.nonzero(np.abs(series - target) > drift_tol * target)[0]
    settle = traj.times[int(outside[-1]) + 1] if outside.size and outside[-1] + 1 < series.size \
        else traj.times[0]
    return SaturationMetrics(amplitude=overall, per_mode_amplitude=per_mode,
                             frequency=freq, settling_time=float(settle))


def quadratic_energy(traj: Trajectory, params: OptomechanicalParams) -> NDArray:
    """Total quadratic energy (zdot^2 + omega^2 z^2)/2 along a fullband trajectory."""
    omegas = np.asarray(params.mode_frequencies)
    n = omegas.size
    z = traj.states[:, :n]
    zd = traj.states[:, n:]
    return 0.5 * ((zd**2).sum(axis=1) + ((omegas * z) ** 2).sum(axis=1))
