"""Derivation of the shipped reference calibration.

The reference dataset publishes outcome metrics, not noise parameters, so
the free knobs of the model are inferred from those outcomes.  Run

    python -m rydlink.calibration            # show derivation + verification
    python -m rydlink.calibration --write P  # also write the preset TOML to P

Measured quantities taken as fixed inputs:
  * storage+readout efficiency 0.164, split evenly between storage and
    retrieval (minimal-assumption default, overridable),
  * store-and-patch efficiency 0.068, which fixes the patch emission at
    0.068 / eta_store,
  * measurement-path transmission 0.481 and detector efficiency 0.656,
  * 670 ns hold, 1.4 us memory-node spin-wave lifetime (Gaussian decay).

Inferred knobs and the published values that pin them:
  * signal-path accidental-click probability ``d_s``: the raw/deducted
    average state fidelity gap (0.848 vs 0.899) fixes the coincidence
    washout w = (0.848-1/2)/(0.899-1/2); darks with probability d_s per
    window reproduce exactly that washout at the signal click rate q.
  * emitter bin cross-talk ``c`` (equatorial-axis flip per emitted photon):
    fixed jointly by the fixed-basis pair visibility 0.799 = w(1-2c)^2 and
    the two-node ZZ correlator 0.694 = w^2(1-2c)^3; the shipped value is
    the midpoint of the two single-knob solutions.
  * source preparation error ``eps_A``: fixed by the swept fringe
    visibility 0.647 = w (1-eps_A) gamma_B (1-c)^3.
  * emitting-node lifetime ``tau_A``: the two-node XX/ZZ ratio matches the
    single-node V1/V0 ratio, implying negligible emitting-node dephasing
    over its ~1.2 us idle; 20 us reproduces that.
  * herald-path dark probability: 1e-5 per window (an ordinary SPD figure;
    the herald observables pin no tighter value).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - version shim
    import tomli as tomllib

from .config import ExperimentConfig, NodeSettings, config_from_mapping
from .detection import DetectorParams
from .superatom import Timeline, coherence_factor

#: Published targets the calibration reproduces (value, acceptance band).
TARGETS = {
    "visibility_fixed_zz": (0.799, 0.02),
    "visibility_swept_xx": (0.647, 0.02),
    "state_fidelity_avg_raw": (0.848, 0.015),
    "state_fidelity_avg_deducted": (0.899, 0.015),
    "process_fidelity_raw": (0.764, 0.02),
    "process_fidelity_deducted": (0.834, 0.02),
    "pauli_xx": (0.567, 0.03),
    "pauli_yy": (-0.560, 0.03),
    "pauli_zz": (0.694, 0.03),
}

STORAGE_RETRIEVAL_EFF = 0.164
STORE_AND_PATCH_EFF = 0.068
TRANSMISSION_EFF = 0.481
DETECTOR_EFF = 0.656
STORAGE_HOLD = 670e-9
MEMORY_LIFETIME = 1.4e-6
EMITTER_LIFETIME = 20e-6
REMOTE_IDLE = 1.2e-6
HERALD_DARK = 1e-5


def derive_knobs() -> dict[str, float]:
    """Closed-form inference of the free noise knobs from the targets."""
    eta = float(np.sqrt(STORAGE_RETRIEVAL_EFF))
    q_signal = eta * TRANSMISSION_EFF * DETECTOR_EFF

    f_raw, _ = TARGETS["state_fidelity_avg_raw"]
    f_ded, _ = TARGETS["state_fidelity_avg_deducted"]
    washout = (f_raw - 0.5) / (f_ded - 0.5)
    dark_signal = q_signal * (1.0 - washout) / (2.0 * washout * (1.0 - q_signal))

    v0, _ = TARGETS["visibility_fixed_zz"]
    zz2, _ = TARGETS["pauli_zz"]
    c_from_v0 = 0.5 * (1.0 - np.sqrt(v0 / washout))
    c_from_zz = 0.5 * (1.0 - np.cbrt(zz2 / washout**2))
    crosstalk = 0.5 * float(c_from_v0 + c_from_zz)

    gamma_b = coherence_factor(STORAGE_HOLD, MEMORY_LIFETIME)
    v1, _ = TARGETS["visibility_swept_xx"]
    prep_error = 1.0 - v1 / (washout * gamma_b * (1.0 - crosstalk) ** 3)

    return {
        "eta": eta,
        "eta_patch_b": STORE_AND_PATCH_EFF / eta,
        "q_signal": q_signal,
        "washout": washout,
        "dark_signal": float(dark_signal),
        "crosstalk": crosstalk,
        "gamma_b": gamma_b,
        "prep_error": float(prep_error),
    }


def reference_config(**overrides) -> ExperimentConfig:
    """The calibrated configuration as an in-memory object."""
    k = derive_knobs()
    node_a = NodeSettings(
        eta_store=1.0,
        eta_retrieve=k["eta"],
        eta_patch=1.0,
        source_emission=1.0,
        emission_crosstalk=k["crosstalk"],
        excitation_error=k["prep_error"],
        dephasing_lifetime=EMITTER_LIFETIME,
    )
    node_b = NodeSettings(
        eta_store=k["eta"],
        eta_retrieve=k["eta"],
        eta_patch=k["eta_patch_b"],
        source_emission=1.0,
        emission_crosstalk=k["crosstalk"],
        excitation_error=0.0,
        dephasing_lifetime=MEMORY_LIFETIME,
    )
    detectors = {}
    for spd in ("spd1", "spd2", "spd3", "spd4", "spd5", "spd6"):
        dark = HERALD_DARK if spd in ("spd3", "spd4") else k["dark_signal"]
        detectors[spd] = DetectorParams(DETECTOR_EFF, dark)
    base = dict(
        eta_t=TRANSMISSION_EFF,
        node_a=node_a,
        node_b=node_b,
        detectors=detectors,
        timeline=Timeline(storage_hold=STORAGE_HOLD, remote_idle=REMOTE_IDLE),
        phase_grid=tuple(float(x) for x in np.linspace(0.0, 2.0 * np.pi, 13)),
        seed=20240,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def preset_toml() -> str:
    """Render the calibrated preset as a TOML document."""
    k = derive_knobs()
    grid = ", ".join(repr(float(x)) for x in np.linspace(0.0, 2.0 * np.pi, 13))
    lines = [
        "# Calibrated reference scenario.",
        "# Fixed inputs: storage+readout 0.164 (split evenly), store-and-patch",
        "# 0.068, transmission 0.481, detector efficiency 0.656, 670 ns hold,",
        "# 1.4 us memory lifetime.  The remaining knobs below are inferred from",
        "# the published visibilities and fidelity gaps (see rydlink.calibration);",
        "# they are fitted, not measured.",
        "",
        "schema_version = 1",
        'mode = "analytic"',
        "shots = 100000",
        "seed = 20240",
        f"eta_t = {TRANSMISSION_EFF!r}",
        "theta0 = 0.0",
        f"phase_grid = [{grid}]",
        "",
        "[node_a]",
        "eta_store = 1.0",
        f"eta_retrieve = {k['eta']!r}",
        "eta_patch = 1.0",
        "source_emission = 1.0",
        f"emission_crosstalk = {k['crosstalk']!r}   # inferred",
        f"excitation_error = {k['prep_error']!r}   # inferred",
        f"dephasing_lifetime = {EMITTER_LIFETIME!r}   # inferred (see module docs)",
        "",
        "[node_b]",
        f"eta_store = {k['eta']!r}",
        f"eta_retrieve = {k['eta']!r}",
        f"eta_patch = {k['eta_patch_b']!r}",
        f"emission_crosstalk = {k['crosstalk']!r}   # inferred",
        f"dephasing_lifetime = {MEMORY_LIFETIME!r}",
        "",
        "[timeline]",
        "bin_separation = 4.25e-07",
        f"storage_hold = {STORAGE_HOLD!r}",
        "patch_to_retrieval = 0.0",
        f"remote_idle = {REMOTE_IDLE!r}",
        "",
    ]
    for spd in ("spd1", "spd2", "spd3", "spd4", "spd5", "spd6"):
        dark = HERALD_DARK if spd in ("spd3", "spd4") else k["dark_signal"]
        lines += [
            f"[detectors.{spd}]",
            f"efficiency = {DETECTOR_EFF!r}",
            f"dark_prob = {dark!r}" + ("" if spd in ("spd3", "spd4") else "   # inferred"),
            "",
        ]
    return "\n".join(lines)


def verify(cfg: ExperimentConfig) -> list[tuple[str, float, float, float, bool]]:
    """Run the analytic pipelines and compare against every target band."""
    from .experiments import run_single_node_suite, run_two_node

    suite = run_single_node_suite(cfg).report
    two = run_two_node(cfg).report
    rows = []
    for name, (target, band) in TARGETS.items():
        source = two if name.startswith("pauli_") else suite
        value = source.metric(name).value
        rows.append((name, value, target, band, abs(value - target) <= band))
    return rows


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--write", metavar="PATH", help="write the preset TOML here")
    parser.add_argument(
        "--skip-verify", action="store_true", help="skip the analytic verification run"
    )
    args = parser.parse_args(argv)

    knobs = derive_knobs()
    print("derived knobs:")
    for key, value in knobs.items():
        print(f"  {key:14s} = {value:.8f}")

    text = preset_toml()
    cfg = config_from_mapping(tomllib.loads(text))
    if args.write:
        Path(args.write).write_text(text)
        print(f"wrote preset to {args.write}")
    if not args.skip_verify:
        print("\nverification against target bands:")
        for name, value, target, band, ok in verify(cfg):
            flag = "ok " if ok else "OUT"
            print(f"  [{flag}] {name:30s} {value: .4f}  target {target: .3f} +- {band}")
        if not all(row[4] for row in verify(cfg)):
            return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
