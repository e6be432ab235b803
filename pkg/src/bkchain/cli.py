"""Scenario execution and dataset emission.

A scenario is a strict-schema JSON configuration naming one experiment
kind (respond, spectrum, phase-diagram, thermal, sense, simulate, tones),
a chain, and kind-specific parameters. Running it writes one or more CSV
datasets plus a manifest recording the fully resolved parameter set, the
tool version, the seed, and a sha256 checksum per dataset, so identical
configurations reproduce byte-identical files.

Configuration conventions: frequencies are given in Hz and converted to
rad/s internally (dataset headers state their units); complex tables are
emitted as paired _re/_im columns; floats carry 17 significant digits so a
round trip through the file is exact. Unknown configuration keys are
rejected with their path.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .chain import ChainSpec
from .errors import BkcError, SchemaError
from .nonlinear import NoiseDrive, OptomechanicalParams, simulate
from .response import (
    end_to_end_gain_map,
    quadrature_labels,
    susceptibility,
)
from .sensing import sensing_report
from .spectra import bloch_bands
from .thermal import population_amplification, steady_covariance, thermal_spectrum
from .tones import compile_tones

KINDS = ("respond", "spectrum", "phase-diagram", "thermal", "sense", "simulate", "tones")

TWO_PI = 2.0 * math.pi


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


@dataclass
class Table:
    """Column-labelled dataset; the unit of everything the CLI emits."""

    columns: list[str]
    rows: list[list]


def emit_dataset(table: Table, path: Path, fmt: str = "csv") -> None:
    """Write a table as CSV (default) or JSON with stable ordering."""
    if fmt == "csv":
        lines = [",".join(table.columns)]
        for row in table.rows:
            lines.append(",".join(_fmt(v) for v in row))
        path.write_text("\n".join(lines) + "\n", newline="\n")
    elif fmt == "json":
        obj = {"columns": table.columns,
               "rows": [[_fmt(v) for v in row] for row in table.rows]}
        path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", newline="\n")
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")


def read_csv(path: Path) -> Table:
    lines = path.read_text().splitlines()
    columns = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:] if line]
    return Table(columns=columns, rows=rows)


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

_CHAIN_KEYS = {
    "n_sites": (int,),
    "hopping_magnitude_hz": (int, float),
    "squeezing_magnitude_hz": (int, float),
    "phase_rad": (int, float),
    "damping_hz": (int, float, list),
    "detuning_hz": (int, float, list),
    "boundary": (str,),
}
_CHAIN_REQUIRED = ("n_sites", "hopping_magnitude_hz", "squeezing_magnitude_hz",
                   "phase_rad", "damping_hz")

_HARDWARE_KEYS = {
    "mode_frequencies_hz": (list,),
    "vacuum_couplings_hz": (list,),
    "cavity_linewidth_hz": (int, float),
    "detuning_hz": (int, float),
    "max_photon_number": (int, float),
}
_HARDWARE_REQUIRED = ("mode_frequencies_hz", "vacuum_couplings_hz", "cavity_linewidth_hz")

_KIND_KEYS = {
    "respond": {"probe_frequency_hz": (int, float)},
    "spectrum": {"n_k": (int,)},
    "phase-diagram": {
        "phi_grid": (dict,),
        "ratio_grid": (dict,),
    },
    "thermal": {
        "bath_occupation": (int, float, list),
        "omega_grid": (dict,),
    },
    "sense": {
        "epsilon_grid": (dict,),
        "n_range": (list,),
    },
    "simulate": {
        "hardware": (dict,),
        "mode": (str,),
        "t_span_s": (dict,),
        "step_s": (int, float),
        "initial_re": (list,),
        "initial_im": (list,),
        "noise_strength": (int, float),
        "record_every": (int,),
        "linear_only": (bool,),
    },
    "tones": {"hardware": (dict,)},
}
_KIND_REQUIRED = {
    "respond": (),
    "spectrum": (),
    "phase-diagram": ("phi_grid", "ratio_grid"),
    "thermal": ("bath_occupation",),
    "sense": ("epsilon_grid",),
    "simulate": ("hardware", "mode", "t_span_s"),
    "tones": ("hardware",),
}
_GRID_KEYS = {"start": (int, float), "stop": (int, float), "count": (int,)}


def _check_keys(obj: dict, allowed: dict, required, path: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected an object")
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}: unknown key (allowed: {sorted(allowed)})")
        if not isinstance(obj[key], allowed[key]):
            names = "/".join(t.__name__ for t in allowed[key])
            raise SchemaError(f"{path}.{key}: expected {names}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise SchemaError(f"{path}: missing required keys {missing}")


def _grid(obj: dict, path: str) -> np.ndarray:
    _check_keys(obj, _GRID_KEYS, ("start", "stop", "count"), path)
    if obj["count"] < 2:
        raise SchemaError(f"{path}.count: need at least 2 points")
    return np.linspace(float(obj["start"]), float(obj["stop"]), int(obj["count"]))


def validate_config(config: dict) -> dict:
    """Validate and return the configuration; SchemaError on any violation."""
    if not isinstance(config, dict):
        raise SchemaError("top level: expected an object")
    if "kind" not in config or "chain" not in config:
        raise SchemaError("top level: missing required keys ['kind', 'chain']")
    kind = config["kind"]
    if kind not in KINDS:
        raise SchemaError(f"kind: must be one of {list(KINDS)}, got {kind!r}")
    allowed = {"kind": (str,), "chain": (dict,), "seed": (int,)}
    allowed.update(_KIND_KEYS[kind])
    _check_keys(config, allowed, ("kind", "chain") + _KIND_REQUIRED[kind], "top level")
    _check_keys(config["chain"], _CHAIN_KEYS, _CHAIN_REQUIRED, "chain")
    if "hardware" in config:
        _check_keys(config["hardware"], _HARDWARE_KEYS, _HARDWARE_REQUIRED, "hardware")
    return config


def chain_from_config(cfg: dict) -> ChainSpec:
    n = int(cfg["n_sites"])

    def rads(value):
        if isinstance(value, list):
            return [TWO_PI * float(v) for v in value]
        return TWO_PI * float(value)

    try:
        return ChainSpec.common_phase(
            n,
            TWO_PI * float(cfg["hopping_magnitude_hz"]),
            TWO_PI * float(cfg["squeezing_magnitude_hz"]),
            float(cfg["phase_rad"]),
            rads(cfg["damping_hz"]),
            rads(cfg.get("detuning_hz", 0.0)),
            cfg.get("boundary", "open"),
        )
    except ValueError as exc:
        raise SchemaError(f"chain: {exc}") from exc


def chain_to_config(spec: ChainSpec) -> dict:
    """Serialize a common-phase chain back to the configuration format."""
    return {
        "n_sites": spec.n_sites,
        "hopping_magnitude_hz": abs(spec.hopping) / TWO_PI,
        "squeezing_magnitude_hz": abs(spec.squeezing) / TWO_PI,
        "phase_rad": spec.phase,
        "damping_hz": [g / TWO_PI for g in spec.damping],
        "detuning_hz": [e / TWO_PI for e in spec.detuning],
        "boundary": spec.boundary,
    }


def hardware_from_config(cfg: dict) -> OptomechanicalParams:
    try:
        return OptomechanicalParams(
            mode_frequencies=[TWO_PI * float(v) for v in cfg["mode_frequencies_hz"]],
            vacuum_couplings=[TWO_PI * float(v) for v in cfg["vacuum_couplings_hz"]],
            cavity_linewidth=TWO_PI * float(cfg["cavity_linewidth_hz"]),
            detuning=TWO_PI * float(cfg["detuning_hz"]) if "detuning_hz" in cfg else None,
            max_photon_number=float(cfg.get("max_photon_number", 1.0)),
        )
    except ValueError as exc:
        raise SchemaError(f"hardware: {exc}") from exc


# ---------------------------------------------------------------------------
# scenario runners (each returns {dataset name: Table})
# ---------------------------------------------------------------------------

def _complex_matrix_table(matrix: np.ndarray, labels: list[str]) -> Table:
    columns = ["response"]
    for lbl in labels:
        columns += [f"{lbl}_re", f"{lbl}_im"]
    rows = []
    for i, lbl in enumerate(labels):
        row: list = [lbl]
        for j in range(len(labels)):
            row += [float(matrix[i, j].real), float(matrix[i, j].imag)]
        rows.append(row)
    return Table(columns=columns, rows=rows)


def _run_respond(spec: ChainSpec, config: dict, rng, threads: int):
    omega = TWO_PI * float(config.get("probe_frequency_hz", 0.0))
    chi = susceptibility(spec, omega)
    return {"susceptibility": _complex_matrix_table(chi.matrix, quadrature_labels(spec.n_sites))}


def _run_spectrum(spec: ChainSpec, config: dict, rng, threads: int):
    bands = bloch_bands(spec, int(config.get("n_k", 256)))
    rows = [
        [float(k), wp.real, wp.imag, wm.real, wm.imag]
        for k, wp, wm in zip(bands.k, bands.omega_plus, bands.omega_minus)
    ]
    return {"bands": Table(
        columns=["k", "omega_plus_re_rad_s", "omega_plus_im_rad_s",
                 "omega_minus_re_rad_s", "omega_minus_im_rad_s"],
        rows=rows,
    )}


def _run_phase_diagram(spec: ChainSpec, config: dict, rng, threads: int):
    phi = _grid(config["phi_grid"], "phi_grid")
    ratio = _grid(config["ratio_grid"], "ratio_grid")
    result = end_to_end_gain_map(spec, phi, ratio, threads=threads)
    rows = []
    for i, p in enumerate(result.phi):
        for j, r in enumerate(result.ratio):
            rows.append([float(p), float(r), float(result.gain[i, j]),
                         result.labels[i, j], int(result.winding_plus[i, j]),
                         -int(result.winding_plus[i, j])])
    return {"phase_diagram": Table(
        columns=["phi_rad", "lambda_over_j", "end_to_end_gain_abs",
                 "label", "winding_plus", "winding_minus"],
        rows=rows,
    )}


def _run_thermal(spec: ChainSpec, config: dict, rng, threads: int):
    occ = config["bath_occupation"]
    occ_list = [float(v) for v in occ] if isinstance(occ, list) else float(occ)
    cov = steady_covariance(spec, occ_list)
    amp = population_amplification(spec)
    pops = cov.site_populations()
    occ_arr = cov.bath_occupations
    rows = [
        [j + 1, float(occ_arr[j]), float(pops[j]), float(amp[j])]
        for j in range(spec.n_sites)
    ]
    out = {"populations": Table(
        columns=["site", "bath_occupation", "population", "amplification_factor"],
        rows=rows,
    )}
    if "omega_grid" in config:
        omegas = TWO_PI * _grid(config["omega_grid"], "omega_grid")
        sp = thermal_spectrum(spec, occ_list, omegas)
        cols = ["omega_rad_s"] + [f"psd_site{j + 1}" for j in range(spec.n_sites)]
        out["spectra"] = Table(
            columns=cols,
            rows=[[float(w)] + [float(v) for v in sp.psd[i]]
                  for i, w in enumerate(sp.omegas)],
        )
    return out


def _run_sense(spec: ChainSpec, config: dict, rng, threads: int):
    eps = TWO_PI * _grid(config["epsilon_grid"], "epsilon_grid")
    n_values = [int(v) for v in config.get("n_range", [spec.n_sites])]
    rows = []
    for n in n_values:
        sub = ChainSpec(n, spec.hopping, spec.squeezing,
                        spec.damping[0], 0.0, spec.boundary)
        rep = sensing_report(sub, eps)
        for e, f in zip(rep.epsilons, rep.forward):
            rows.append([n, float(e), float(f.real), float(f.imag),
                         float(rep.responsivity)])
    return {"sensing": Table(
        columns=["n_sites", "epsilon_rad_s", "chi_x1_to_p1_re",
                 "chi_x1_to_p1_im", "responsivity"],
        rows=rows,
    )}


def _run_simulate(spec: ChainSpec, config: dict, rng, threads: int):
    params = hardware_from_config(config["hardware"])
    span = config["t_span_s"]
    _check_keys(span, {"start": (int, float), "stop": (int, float)},
                ("start", "stop"), "t_span_s")
    initial = None
    if "initial_re" in config or "initial_im" in config:
        re = np.asarray(config.get("initial_re", [0.0] * spec.n_sites), dtype=float)
        im = np.asarray(config.get("initial_im", [0.0] * spec.n_sites), dtype=float)
        initial = re + 1j * im
    drive = None
    if "noise_strength" in config:
        drive = [NoiseDrive(float(config["noise_strength"]),
                            seed=int(config.get("seed", 0)))]
    traj = simulate(
        spec, params,
        drive=drive,
        t_span=(float(span["start"]), float(span["stop"])),
        mode=config["mode"],
        initial=initial,
        include_nonlinearity=not config.get("linear_only", False),
        step=float(config["step_s"]) if "step_s" in config else None,
        record_every=int(config.get("record_every", 1)),
    )
    n = spec.n_sites
    if config["mode"] == "envelope":
        cols = ["t_s"] + [f"a{j + 1}_re" for j in range(n)] + [f"a{j + 1}_im" for j in range(n)]
        rows = [[float(t)] + [float(v.real) for v in s] + [float(v.imag) for v in s]
                for t, s in zip(traj.times, traj.states)]
    else:
        cols = ["t_s"] + [f"z{j + 1}" for j in range(n)] + [f"zdot{j + 1}" for j in range(n)]
        rows = [[float(t)] + [float(v) for v in s] for t, s in zip(traj.times, traj.states)]
    table = Table(columns=cols, rows=rows)
    return {"trajectory": table, "_status": traj.status}


def _run_tones(spec: ChainSpec, config: dict, rng, threads: int):
    params = hardware_from_config(config["hardware"])
    schedule = compile_tones(spec, params)
    return {"_text:tones": schedule.table()}


_RUNNERS = {
    "respond": _run_respond,
    "spectrum": _run_spectrum,
    "phase-diagram": _run_phase_diagram,
    "thermal": _run_thermal,
    "sense": _run_sense,
    "simulate": _run_simulate,
    "tones": _run_tones,
}


def run_scenario(config_path: str | Path, out_dir: str | Path,
                 seed: Optional[int] = None, threads: int = 1) -> dict:
    """Execute one scenario; returns the manifest written alongside the data."""
    config_path = Path(config_path)
    try:
        config = json.loads(config_path.read_text())
    except FileNotFoundError as exc:
        raise SchemaError(f"config file not found: {config_path}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"config is not valid JSON: {exc}") from exc
    validate_config(config)
    if seed is not None:
        config["seed"] = int(seed)
    rng = np.random.default_rng(config.get("seed", 0))
    spec = chain_from_config(config["chain"])
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = _RUNNERS[config["kind"]](spec, config, rng, max(1, int(threads)))
    status = results.pop("_status", "completed")
    datasets = []
    for name, data in sorted(results.items()):
        if name.startswith("_text:"):
            path = out_dir / f"{name.removeprefix('_text:')}.txt"
            path.write_text(data, newline="\n")
        else:
            path = out_dir / f"{name}.csv"
            emit_dataset(data, path)
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        datasets.append({"path": path.name, "sha256": digest})
    manifest = {
        "tool": "bkchain",
        "version": __version__,
        "kind": config["kind"],
        "config": config,
        "seed": config.get("seed", 0),
        "threads": int(threads),
        "status": status,
        "datasets": datasets,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", newline="\n"
    )
    return manifest


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bkchain",
        description="Run bosonic-Kitaev-chain scenarios and emit datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a '{kind}' scenario")
        p.add_argument("--config", required=True, help="path to the JSON scenario file")
        p.add_argument("--out", required=True, help="output directory for datasets")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    args = parser.parse_args(argv)
    try:
        config = json.loads(Path(args.config).read_text())
        if isinstance(config, dict) and config.get("kind", args.command) != args.command:
            raise SchemaError(
                f"config kind {config.get('kind')!r} does not match subcommand {args.command!r}"
            )
        if isinstance(config, dict):
            config.setdefault("kind", args.command)
            tmp = Path(args.out)
            tmp.mkdir(parents=True, exist_ok=True)
            resolved = tmp / "_resolved_config.json"
            resolved.write_text(json.dumps(config, sort_keys=True, indent=2) + "\n",
                                newline="\n")
            try:
                manifest = run_scenario(resolved, args.out, seed=args.seed,
                                        threads=args.threads)
            finally:
                resolved.unlink(missing_ok=True)
        else:
            raise SchemaError("top level: expected an object")
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"schema error: config is not valid JSON: {exc}", file=sys.stderr)
        return 2
    except (BkcError, np.linalg.LinAlgError, OSError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {len(manifest['datasets'])} dataset(s) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
