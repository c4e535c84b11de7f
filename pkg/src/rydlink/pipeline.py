"""Protocol orchestration: the single-node heralded-storage pipeline, the
two-node entanglement pipeline, phase sweeps, and metric extraction.

Both pipelines assemble the exact joint state of all surviving photon modes
(losses appear as vacuum weight, so every state stays normalized), then hand
it to the detector layer.  Analytic mode uses the exact click-pattern
distribution; sampled mode draws shots from that same distribution with
counter-based seeding, which makes the two modes converge by construction.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .config import PATH_DETECTORS, ExperimentConfig, NodeSettings
from .detection import (
    CoincidenceTable,
    DetectorParams,
    PathSpec,
    PointTally,
    binomial_stderr,
    joint_click_distribution,
    joint_outcome_probs,
    sample_pattern_indices,
    tally_from_click_weights,
)
from .photonics import (
    InputStateId,
    MeasurementSetting,
    basis_projectors,
    timebin_to_polarization,
    transmission_loss_channel,
)
from .qstate import (
    BasisKind,
    JointState,
    RegisterKind,
    RegisterLabel,
    apply_channel,
    atom_register,
    partial_trace,
    pauli_expectation,
    photon_register,
    project,
)
from .superatom import (
    bin_crosstalk_channel,
    eit_store,
    excite_level,
    excite_superposition,
    motional_dephasing,
    read_and_patch,
    readout,
)

#: Phase of the excitation pulse pair that prepares each equatorial state.
SOURCE_PHASES = {
    InputStateId.D: 0.0,
    InputStateId.A: np.pi,
    InputStateId.R: np.pi / 2.0,
    InputStateId.LC: -np.pi / 2.0,
}

PROCESS_INPUTS = (InputStateId.E, InputStateId.L, InputStateId.D, InputStateId.R)

_Z3 = np.diag([1.0, -1.0, 1.0]).astype(complex)


class StatisticsError(RuntimeError):
    """Raised when a sampled run produced no usable herald statistics."""


def point_seed(base_seed: int, *tags: object) -> int:
    """Stable 64-bit stream seed for one measurement point."""
    text = "|".join([str(base_seed), *map(str, tags)])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# state assembly


def _emit_crosstalk(s: JointState, reg: RegisterLabel, node: NodeSettings) -> JointState:
    if node.emission_crosstalk > 0.0:
        s = apply_channel(s, bin_crosstalk_channel(node.emission_crosstalk), reg)
    return s


def _finalize_photon(
    s: JointState, reg: RegisterLabel, cfg: ExperimentConfig
) -> tuple[JointState, RegisterLabel]:
    """Transmission loss followed by time-bin to polarization conversion."""
    if cfg.eta_t < 1.0:
        s = apply_channel(s, transmission_loss_channel(cfg.eta_t), reg)
    s = timebin_to_polarization(s, reg, cfg.theta0)
    return s, reg.with_basis(BasisKind.POLARIZATION)


def _prepare_source(
    atom: RegisterLabel, input_id: InputStateId, node: NodeSettings
) -> JointState:
    params = node.params()
    if input_id is InputStateId.E:
        return excite_level(atom, 0, params)
    if input_id is InputStateId.L:
        return excite_level(atom, 1, params)
    return excite_superposition(atom, SOURCE_PHASES[input_id], params)


@dataclass(frozen=True)
class PairState:
    """Heralded single-node state over (herald, signal) polarization photons."""

    state: JointState
    herald: RegisterLabel
    signal: RegisterLabel


def build_single_node_state(
    cfg: ExperimentConfig, input_id: InputStateId, retrieval_phase: float
) -> PairState:
    """Source at A, EIT storage at B, heralding patch, retrieval readout."""
    atom_a = atom_register(RegisterKind.ATOM_A, "src")
    atom_b = atom_register(RegisterKind.ATOM_B, "mem")
    flight = photon_register("flight")
    herald = photon_register("herald")
    signal = photon_register("signal")

    s = _prepare_source(atom_a, input_id, cfg.node_a)
    s = readout(s, atom_a, flight, cfg.node_a.source_emission, cfg.node_a.read_phase)
    s = _emit_crosstalk(s, flight, cfg.node_a)
    s = partial_trace(s, atom_a)

    s = eit_store(s, flight, atom_b, cfg.node_b.eta_store)
    residence = cfg.timeline.storage_hold + cfg.timeline.patch_to_retrieval
    s = motional_dephasing(
        s, atom_b, residence, cfg.node_b.dephasing_lifetime, cfg.node_b.dephasing_model
    )
    s = read_and_patch(s, atom_b, herald, cfg.node_b.eta_patch, cfg.node_b.read_phase)
    s = _emit_crosstalk(s, herald, cfg.node_b)
    s = readout(s, atom_b, signal, cfg.node_b.eta_retrieve, retrieval_phase)
    s = _emit_crosstalk(s, signal, cfg.node_b)
    s = partial_trace(s, atom_b)

    s, herald = _finalize_photon(s, herald, cfg)
    s, signal = _finalize_photon(s, signal, cfg)
    return PairState(s, herald, signal)


@dataclass(frozen=True)
class TwoNodeState:
    """Heralded two-node state over (herald, signal A, signal B) photons."""

    state: JointState
    herald: RegisterLabel
    signal_a: RegisterLabel
    signal_b: RegisterLabel


def build_two_node_state(
    cfg: ExperimentConfig, retrieval_phase_b: float
) -> TwoNodeState:
    """Patch at A (atom-photon entanglement), storage and patch at B,
    retrieval at both nodes."""
    atom_a = atom_register(RegisterKind.ATOM_A, "mem_a")
    atom_b = atom_register(RegisterKind.ATOM_B, "mem_b")
    flight = photon_register("flight")
    herald = photon_register("herald")
    signal_a = photon_register("signal_a")
    signal_b = photon_register("signal_b")

    s = excite_superposition(atom_a, 0.0, cfg.node_a.params())
    s = read_and_patch(s, atom_a, flight, cfg.node_a.eta_patch, cfg.node_a.read_phase)
    s = _emit_crosstalk(s, flight, cfg.node_a)

    s = eit_store(s, flight, atom_b, cfg.node_b.eta_store)
    residence_b = cfg.timeline.storage_hold + cfg.timeline.patch_to_retrieval
    s = motional_dephasing(
        s, atom_b, residence_b, cfg.node_b.dephasing_lifetime, cfg.node_b.dephasing_model
    )
    s = motional_dephasing(
        s,
        atom_a,
        cfg.timeline.remote_idle,
        cfg.node_a.dephasing_lifetime,
        cfg.node_a.dephasing_model,
    )
    s = read_and_patch(s, atom_b, herald, cfg.node_b.eta_patch, cfg.node_b.read_phase)
    s = _emit_crosstalk(s, herald, cfg.node_b)
    s = readout(s, atom_a, signal_a, cfg.node_a.eta_retrieve, cfg.node_a.read_phase)
    s = _emit_crosstalk(s, signal_a, cfg.node_a)
    s = readout(s, atom_b, signal_b, cfg.node_b.eta_retrieve, retrieval_phase_b)
    s = _emit_crosstalk(s, signal_b, cfg.node_b)
    s = partial_trace(s, atom_a)
    s = partial_trace(s, atom_b)

    s, herald = _finalize_photon(s, herald, cfg)
    s, signal_a = _finalize_photon(s, signal_a, cfg)
    s, signal_b = _finalize_photon(s, signal_b, cfg)
    return TwoNodeState(s, herald, signal_a, signal_b)


# ---------------------------------------------------------------------------
# measurement engine


def _path_spec(cfg: ExperimentConfig, name: str) -> PathSpec:
    plus_id, minus_id = PATH_DETECTORS[name]
    return PathSpec(name, plus_id, minus_id, cfg.detector(plus_id), cfg.detector(minus_id))


def measure_point(
    cfg: ExperimentConfig,
    state: JointState,
    path_regs: Sequence[tuple[str, RegisterLabel, MeasurementSetting]],
    phase: float,
    seed_tags: tuple,
    table: CoincidenceTable | None = None,
) -> CoincidenceTable:
    """Measure one (phase, setting) point into a coincidence table.

    ``path_regs`` lists (path name, photon register, setting) with the
    herald path first.  In analytic mode the table receives exact expected
    counts at ``cfg.shots`` trials; in sampled mode, Monte Carlo tallies.
    """
    paths = [_path_spec(cfg, name) for name, _, _ in path_regs]
    outcome_probs = joint_outcome_probs(
        state, [(reg, setting) for _, reg, setting in path_regs]
    )
    dist = joint_click_distribution(outcome_probs, paths)
    setting_label = "/".join(setting.name for _, _, setting in path_regs)
    shots = cfg.shots
    if cfg.mode == "analytic":
        weights = {
            pattern: prob * shots for pattern, prob in dist.probabilities.items()
        }
    else:
        seed = point_seed(cfg.seed, *seed_tags, setting_label, phase)
        indices = sample_pattern_indices(dist, shots, seed)
        counts = np.bincount(indices, minlength=len(dist.canonical_items()))
        patterns = [p for p, _ in dist.canonical_items()]
        weights = {
            pattern: float(count)
            for pattern, count in zip(patterns, counts)
            if count > 0
        }
    return tally_from_click_weights(
        weights, dist.detector_ids, paths, float(shots), phase, setting_label, table
    )


# ---------------------------------------------------------------------------
# tally reduction


def _signal_sign(symbol: str) -> int:
    return 1 if symbol == "+" else -1


def pair_correlation(tally: PointTally) -> tuple[float, float]:
    """Joint parity expectation over all outcome symbols of coincidences."""
    num = 0.0
    den = 0.0
    for pattern, weight in tally.coincidences().items():
        parity = 1
        for symbol in pattern:
            parity *= _signal_sign(symbol)
        num += parity * weight
        den += weight
    if den <= 0.0:
        raise StatisticsError("no coincidence statistics at this point")
    return num / den, den


def signal_correlation(
    tally: PointTally, flip_on_minus_herald: bool, convention: str
) -> tuple[float, float]:
    """Parity over the signal paths, herald used for gating/frame only."""
    num = 0.0
    den = 0.0
    for pattern, weight in tally.coincidences().items():
        if convention == "discard_minus" and pattern[0] == "-":
            continue
        parity = 1
        for symbol in pattern[1:]:
            parity *= _signal_sign(symbol)
        if flip_on_minus_herald and pattern[0] == "-":
            parity = -parity
        num += parity * weight
        den += weight
    if den <= 0.0:
        raise StatisticsError("no coincidence statistics at this point")
    return num / den, den


def heralded_counts(
    tally: PointTally, signal_setting: MeasurementSetting, convention: str
) -> tuple[float, float]:
    """Corrected (n_plus, n_minus) of the single signal path.

    Under the retain-with-correction convention a minus herald flips the
    delivered qubit's phase, so X and Y outcomes are relabeled for those
    shots; Z outcomes are unaffected.
    """
    n_plus = 0.0
    n_minus = 0.0
    flip_xy = signal_setting in (MeasurementSetting.X, MeasurementSetting.Y)
    for pattern, weight in tally.coincidences().items():
        herald_sym, signal_sym = pattern[0], pattern[1]
        if convention == "discard_minus" and herald_sym == "-":
            continue
        outcome = signal_sym
        if convention == "retain_with_correction" and flip_xy and herald_sym == "-":
            outcome = "+" if signal_sym == "-" else "-"
        if outcome == "+":
            n_plus += weight
        else:
            n_minus += weight
    return n_plus, n_minus


def herald_statistics(tallies: Sequence[PointTally]) -> tuple[float, float, float]:
    """(rate, stderr, trials) pooled over measurement points."""
    heralded = sum(t.heralded() for t in tallies)
    trials = sum(t.trials for t in tallies)
    if trials <= 0:
        raise StatisticsError("no trials recorded")
    rate = heralded / trials
    return rate, binomial_stderr(rate, trials), trials


# ---------------------------------------------------------------------------
# exact (analytic-model) conditioned states


def delivered_qubit_state(pair: PairState, convention: str) -> np.ndarray:
    """Exact normalized 2x2 signal-qubit state conditioned on the herald."""
    p_plus, p_minus, _ = basis_projectors(MeasurementSetting.X)
    _, branch_plus = project(pair.state, p_plus, pair.herald)
    combined = branch_plus
    if convention == "retain_with_correction":
        _, branch_minus = project(pair.state, p_minus, pair.herald)
        corrected = apply_channel(
            branch_minus,
            _unitary_channel(_Z3),
            pair.signal,
        )
        combined = JointState(combined.registers, combined.rho + corrected.rho)
    reduced = combined
    for reg in combined.registers:
        if reg != pair.signal:
            reduced = partial_trace(reduced, reg)
    qubit = np.asarray(reduced.rho)[:2, :2]
    trace = float(np.real(np.trace(qubit)))
    if trace <= 0.0:
        raise StatisticsError("heralded state carries no signal-photon weight")
    return qubit / trace


def _unitary_channel(u: np.ndarray):
    from .qstate import KrausChannel

    return KrausChannel((u,), arity=1)


def two_node_pauli_expectations(
    two: TwoNodeState, convention: str
) -> tuple[float, float, float]:
    """Exact herald-conditioned (XX, YY, ZZ) of the retrieved photon pair."""
    p_plus, p_minus, _ = basis_projectors(MeasurementSetting.X)
    _, branch_plus = project(two.state, p_plus, two.herald)
    combined = branch_plus
    if convention == "retain_with_correction":
        _, branch_minus = project(two.state, p_minus, two.herald)
        corrected = apply_channel(branch_minus, _unitary_channel(_Z3), two.signal_b)
        combined = JointState(combined.registers, combined.rho + corrected.rho)
    reduced = partial_trace(combined, two.herald)
    values = []
    for name in ("X", "Y", "Z"):
        values.append(
            pauli_expectation(
                reduced,
                {two.signal_a: name, two.signal_b: name},
                renormalize=True,
            )
        )
    return tuple(values)  # type: ignore[return-value]


def ideal_reference_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """The same phase structure with every loss and noise knob idealized."""
    def clean(node: NodeSettings) -> NodeSettings:
        return replace(
            node,
            eta_store=1.0,
            eta_retrieve=1.0,
            eta_patch=1.0,
            source_emission=1.0,
            emission_crosstalk=0.0,
            excitation_error=0.0,
            dephasing_lifetime=1e6,
        )

    return replace(
        cfg,
        eta_t=1.0,
        node_a=clean(cfg.node_a),
        node_b=clean(cfg.node_b),
        detectors={spd: DetectorParams() for spd in cfg.detectors},
        mode="analytic",
    )


def ideal_target_vector(cfg: ExperimentConfig, input_id: InputStateId) -> np.ndarray:
    """Pure qubit the ideal pipeline delivers for this input and phase setup."""
    ideal = ideal_reference_config(cfg)
    pair = build_single_node_state(ideal, input_id, retrieval_phase=0.0)
    qubit = delivered_qubit_state(pair, "discard_minus")
    evals, evecs = np.linalg.eigh(qubit)
    if evals[-1] < 1.0 - 1e-9:
        raise StatisticsError("ideal pipeline did not deliver a pure state")
    return evecs[:, -1]
