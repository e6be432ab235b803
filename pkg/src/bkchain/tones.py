"""Modulation-tone compilation and oscillator-capacity planning.

A chain link between modes j and k is driven by two intensity-modulation
tones: a beamsplitter (BS) tone at the frequency difference |omega_k -
omega_j| and a two-mode-squeezing (TMS) tone at the sum omega_k + omega_j.
The modulation depth c_m sets the coupling magnitude through the per-mode
static spring shifts,

    |J|, |lam| = c_m sqrt(deltaomega_j deltaomega_k) / 2,

and the tone phase sets the interaction phase in the rotating frame defined
by the per-mode demodulation oscillators (LOs). Because each tone frequency
is a signed combination of two LO frequencies, the rotating-frame phase

    dphi_m = phi_m - (phi_j +/- phi_k)

is independent of the origin of time; ``rotating_frame_phase`` is that
bookkeeping. With the laser detuned to the positive magic point the
modulated cross-spring enters the force with a negative sign, so realizing
an interaction phase arg(J) requires the hardware tone phase

    phi_m = arg(J) - pi   (Delta > 0;  phi_m = arg(J) for Delta < 0),

a fixed offset that ``compile_tones`` applies and
``coupling_from_modulation`` inverts.

The planner mirrors a digital lock-in with a fixed number of numerical
oscillators (default 8): one LO per mode, leftover oscillators host
internal tones, and any remaining tones go to external generators that are
phase-referenced through a ten-step transfer procedure using the
highest-index oscillator.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .chain import ChainSpec
from .errors import (
    FrequencyCollisionError,
    InfeasiblePlanError,
    InsufficientSpringShiftError,
    MissingOscillatorError,
)
from .nonlinear import OptomechanicalParams

BS = "BS"
TMS = "TMS"

#: Hardware latency of the reference lock-in: output lags the numerical
#: oscillator by this many clock cycles per oscillator index.
CLOCK_CYCLES_PER_OSCILLATOR_INDEX = 16


def _wrap_phase(phi: float) -> float:
    """Map a phase to (-pi, pi]."""
    out = math.remainder(phi, 2.0 * math.pi)
    return math.pi if out == -math.pi else out


@dataclass(frozen=True)
class Tone:
    """One modulation tone addressing the link (j, k), j < k.

    ``rotating_frame_phase`` is the realized interaction phase arg(J) or
    arg(lam); ``phase`` is the hardware tone phase including the
    detuning-sign offset documented in the module header.
    """

    pair: tuple[int, int]
    kind: str
    frequency: float
    depth: float
    phase: float
    rotating_frame_phase: float

    @property
    def label(self) -> str:
        return f"{self.kind}({self.pair[0]},{self.pair[1]})"


@dataclass(frozen=True)
class ToneSchedule:
    """Compiled tone set plus the LO table it is phase-referenced to."""

    tones: tuple[Tone, ...]
    lo_frequencies: tuple[float, ...]
    lo_phases: tuple[float, ...]

    @property
    def n_modes(self) -> int:
        return len(self.lo_frequencies)

    def table(self) -> str:
        """Plain-text table: pair, kind, frequency (Hz), depth, phase (rad)."""
        lines = ["# pair kind frequency_hz depth phase_rad"]
        for t in self.tones:
            lines.append(
                f"{t.pair[0]}-{t.pair[1]} {t.kind} "
                f"{t.frequency / (2.0 * math.pi):.17g} {t.depth:.17g} {t.phase:.17g}"
            )
        return "\n".join(lines) + "\n"


def _chain_links(spec: ChainSpec) -> list[tuple[int, int]]:
    links = [(j, j + 1) for j in range(spec.n_sites - 1)]
    if spec.periodic:
        links.append((0, spec.n_sites - 1))
    return links


def _phase_offset(params: OptomechanicalParams) -> float:
    return math.pi if params.detuning > 0 else 0.0


def _effective_mode_frequencies(spec: ChainSpec, params: OptomechanicalParams):
    """Operating frequencies with per-site detunings folded in.

    A site detuning eps_j is realized by offsetting every tone adjacent to
    the site, equivalent to shifting that mode's effective frequency while
    the LO stays put.
    """
    return [w + e for w, e in zip(params.mode_frequencies, spec.detuning)]


def compile_tones(
    spec: ChainSpec,
    params: OptomechanicalParams,
    collision_tol: Optional[float] = None,
) -> ToneSchedule:
    """Emit one BS and one TMS tone per chain link realizing the spec.

    The depth inverts |J| = c sqrt(deltaomega_j deltaomega_k)/2 and must not
    exceed 1 (InsufficientSpringShiftError otherwise); all tone and LO
    frequencies must be pairwise distinct (FrequencyCollisionError).
    """
    if params.n_modes != spec.n_sites:
        raise ValueError("hardware mode count must match the chain length")
    if collision_tol is None:
        collision_tol = 1e-9 * max(params.mode_frequencies)
    shifts = [abs(params.spring_shift(m)) for m in range(params.n_modes)]
    eff = _effective_mode_frequencies(spec, params)
    offset = _phase_offset(params)
    tones: list[Tone] = []
    for (j, k) in _chain_links(spec):
        denom = math.sqrt(shifts[j] * shifts[k])
        if denom == 0.0:
            raise InsufficientSpringShiftError(
                f"link ({j},{k}): zero spring shift, no coupling possible"
            )
        for kind, amplitude in ((BS, spec.hopping), (TMS, spec.squeezing)):
            mag = abs(amplitude)
            if mag == 0.0:
                continue
            depth = 2.0 * mag / denom
            if depth > 1.0:
                raise InsufficientSpringShiftError(
                    f"link ({j},{k}) {kind}: required depth {depth:.3f} > 1 "
                    f"(insufficient spring shift)"
                )
            target = cmath.phase(amplitude)
            freq = abs(eff[k] - eff[j]) if kind == BS else eff[k] + eff[j]
            tones.append(Tone(
                pair=(j, k),
                kind=kind,
                frequency=freq,
                depth=depth,
                phase=_wrap_phase(target + offset),
                rotating_frame_phase=_wrap_phase(target),
            ))
    freqs = [t.frequency for t in tones] + list(params.mode_frequencies)
    names = [t.label for t in tones] + [f"LO{m}" for m in range(params.n_modes)]
    for i in range(len(freqs)):
        for j in range(i + 1, len(freqs)):
            if abs(freqs[i] - freqs[j]) <= collision_tol:
                raise FrequencyCollisionError(
                    f"{names[i]} and {names[j]} collide at "
                    f"{freqs[i] / (2 * math.pi):.6g} Hz"
                )
    return ToneSchedule(
        tones=tuple(tones),
        lo_frequencies=tuple(params.mode_frequencies),
        lo_phases=(0.0,) * params.n_modes,
    )


def coupling_from_modulation(
    schedule: ToneSchedule, params: OptomechanicalParams
) -> dict[tuple[int, int], dict[str, complex]]:
    """Invert a schedule back to per-link coupling amplitudes.

    Returns {link: {"BS": J, "TMS": lam}} with
    |J| = c sqrt(deltaomega_j deltaomega_k)/2 and arg(J) recovered from the
    tone phase minus the detuning-sign offset. Round-trips ``compile_tones``
    exactly.
    """
    shifts = [abs(params.spring_shift(m)) for m in range(params.n_modes)]
    offset = _phase_offset(params)
    out: dict[tuple[int, int], dict[str, complex]] = {}
    for tone in schedule.tones:
        j, k = tone.pair
        mag = tone.depth * math.sqrt(shifts[j] * shifts[k]) / 2.0
        phase = _wrap_phase(tone.phase - offset)
        out.setdefault((j, k), {})[tone.kind] = mag * cmath.exp(1j * phase)
    return out


def rotating_frame_phase(
    tone_phase: float,
    pair: tuple[int, int],
    sign: str,
    lo_table: dict[int, float],
) -> float:
    """Rotating-frame phase dphi = phi_m - (phi_j +/- phi_k), exact mod 2*pi.

    ``sign`` is "+" for a sum-frequency (TMS) tone and "-" for a
    difference-frequency (BS) tone labelled j +/- k; ``lo_table`` maps mode
    index to LO phase offset.
    """
    j, k = pair
    for m in (j, k):
        if m not in lo_table:
            raise MissingOscillatorError(f"no local oscillator for mode {m}")
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    combo = lo_table[j] + lo_table[k] if sign == "+" else lo_table[j] - lo_table[k]
    return _wrap_phase(tone_phase - combo)


@dataclass(frozen=True)
class ScriptStep:
    """One step of the external-tone phase-transfer procedure."""

    index: int
    action: str
    oscillators: tuple[int, ...]
    description: str


@dataclass(frozen=True)
class TransferScript:
    """Complete referencing script for one externally generated tone."""

    tone_index: int
    steps: tuple[ScriptStep, ...]

    def touched_oscillators(self) -> set[int]:
        return {osc for step in self.steps for osc in step.oscillators}


def _transfer_script(tone_index: int, pair: tuple[int, int], transfer_osc: int) -> TransferScript:
    j, k = pair
    los = (j + 1, k + 1)  # oscillator indices are 1-based, LOs on the lowest
    steps = (
        ScriptStep(1, "set-frequency", (transfer_osc,),
                   "match the transfer oscillator to the external tone frequency"),
        ScriptStep(2, "read-phases", (transfer_osc,) + los,
                   "read instantaneous phases of the transfer oscillator and both mode LOs"),
        ScriptStep(3, "compute-frame-phase", (),
                   "evaluate the transfer oscillator's rotating-frame phase"),
        ScriptStep(4, "cancel-phase", (transfer_osc,),
                   "shift the transfer oscillator to zero rotating-frame phase"),
        ScriptStep(5, "emit-reference", (transfer_osc,),
                   "output a weak tone from the transfer oscillator onto the monitor"),
        ScriptStep(6, "measure-alpha1", (transfer_osc,),
                   "demodulate the monitor to get the reference phase alpha_1"),
        ScriptStep(7, "swap-to-external", (transfer_osc,),
                   "mute the transfer oscillator; enable the external source"),
        ScriptStep(8, "measure-alpha2", (transfer_osc,),
                   "demodulate the monitor to get the external phase alpha_2"),
        ScriptStep(9, "align-external", (),
                   "shift the external source by -(alpha_2 - alpha_1)"),
        ScriptStep(10, "apply-target-phase", (),
                   "shift the external source to the target interaction phase"),
    )
    return TransferScript(tone_index=tone_index, steps=steps)


@dataclass(frozen=True)
class OscillatorPlan:
    """Assignment of LOs and tones to the lock-in's numerical oscillators.

    Oscillator indices are 1-based. ``internal_tones`` maps tone index ->
    oscillator; external tones each carry a full transfer script executed
    serially on the transfer oscillator (index = capacity). When an
    internal tone shares that oscillator, ``restore_internal_tone`` records
    the final re-referencing pass it needs.
    """

    capacity: int
    lo_assignments: dict[int, int]
    internal_tones: dict[int, int]
    external_scripts: tuple[TransferScript, ...]
    transfer_oscillator: Optional[int]
    restore_internal_tone: Optional[int]
    latency_cycles: dict[int, int] = field(default_factory=dict)


def plan_oscillators(
    n_modes: int,
    n_tones: int,
    capacity: int = 8,
    pairs: Optional[Sequence[tuple[int, int]]] = None,
) -> OscillatorPlan:
    """Assign modes and tones to oscillators, spilling tones to external sources.

    LOs occupy the lowest indices. If everything fits within ``capacity``
    no scripts are needed; otherwise the first ``capacity - n_modes`` tones
    stay internal, the rest become external with materialized ten-step
    transfer scripts, and the highest-index oscillator doubles as the
    phase-transfer oscillator. Overflow with n_modes > capacity - 1 is
    infeasible (no transfer slot).
    """
    if n_modes < 1 or n_tones < 0:
        raise ValueError("need at least one mode and a non-negative tone count")
    if pairs is not None and len(pairs) != n_tones:
        raise ValueError("pairs must have one entry per tone")
    overflow = n_modes + n_tones > capacity
    if overflow and n_modes > capacity - 1:
        raise InfeasiblePlanError(
            f"{n_modes} modes with {n_tones} tones exceed capacity {capacity} "
            "and leave no transfer oscillator"
        )
    lo_assignments = {m: m + 1 for m in range(n_modes)}
    n_internal = n_tones if not overflow else capacity - n_modes
    internal = {t: n_modes + 1 + t for t in range(n_internal)}
    scripts = []
    transfer_osc = None
    restore = None
    if overflow:
        transfer_osc = capacity
        default_pair = (0, min(1, n_modes - 1))
        for t in range(n_internal, n_tones):
            pair = tuple(pairs[t]) if pairs is not None else default_pair
            scripts.append(_transfer_script(t, pair, transfer_osc))
        for t, osc in internal.items():
            if osc == transfer_osc:
                restore = t
    latency = {osc: CLOCK_CYCLES_PER_OSCILLATOR_INDEX * osc
               for osc in range(1, capacity + 1)}
    return OscillatorPlan(
        capacity=capacity,
        lo_assignments=lo_assignments,
        internal_tones=internal,
        external_scripts=tuple(scripts),
        transfer_oscillator=transfer_osc,
        restore_internal_tone=restore,
        latency_cycles=latency,
    )
