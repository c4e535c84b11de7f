"""High-level experiment runs: heralded storage of the six benchmark states,
fringe sweeps, process tomography, and the two-node entanglement protocol.

Every run returns a :class:`RunResult` holding the metric report plus the
CSV artifacts (coincidence tables, tomography counts, sweep series, process
matrices), all rendered deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig, PATH_DETECTORS
from .detection import (
    CoincidenceTable,
    PointTally,
    binomial_stderr,
    deduct_dark_counts,
    deducted_count_variances,
    fit_visibility,
)
from .photonics import InputStateId, MeasurementSetting
from .pipeline import (
    PROCESS_INPUTS,
    StatisticsError,
    build_single_node_state,
    build_two_node_state,
    delivered_qubit_state,
    heralded_counts,
    herald_statistics,
    ideal_target_vector,
    measure_point,
    pair_correlation,
    signal_correlation,
    two_node_pauli_expectations,
)
from .qstate import JointState, photon_register, BasisKind
from .report import RunReport, matrix_csv, sweep_csv
from .tomography import (
    TomoDataset,
    classical_limit_check,
    entanglement_fidelity_pauli,
    entanglement_fidelity_vis,
    identity_process,
    process_fidelity,
    reconstruct_process,
    reconstruct_state,
)

OPERATING_PHASE = 0.0

_SETTINGS = (MeasurementSetting.Z, MeasurementSetting.X, MeasurementSetting.Y)


@dataclass
class RunResult:
    report: RunReport
    artifacts: dict[str, str] = field(default_factory=dict)


def _provenance(cfg: ExperimentConfig, protocol: str) -> dict[str, str]:
    return {
        "config_hash": cfg.config_hash(),
        "mode": cfg.mode,
        "seed": str(cfg.seed),
        "schema_version": str(cfg.schema_version),
        "protocol": protocol,
    }


def _path_darks(cfg: ExperimentConfig, paths: tuple[str, ...]) -> dict[str, float]:
    darks = {}
    for name in paths:
        plus_id, minus_id = PATH_DETECTORS[name]
        darks[name] = 0.5 * (
            cfg.detector(plus_id).dark_prob + cfg.detector(minus_id).dark_prob
        )
    return darks


def _mean_detector_eff(cfg: ExperimentConfig, path: str) -> float:
    plus_id, minus_id = PATH_DETECTORS[path]
    return 0.5 * (cfg.detector(plus_id).efficiency + cfg.detector(minus_id).efficiency)


# ---------------------------------------------------------------------------
# single-node tomography measurements


def measure_state_table(
    cfg: ExperimentConfig, input_id: InputStateId
) -> CoincidenceTable:
    """Three-setting heralded tomography table for one input state."""
    pair = build_single_node_state(cfg, input_id, OPERATING_PHASE)
    table: CoincidenceTable | None = None
    for setting in _SETTINGS:
        table = measure_point(
            cfg,
            pair.state,
            [
                ("herald", pair.herald, MeasurementSetting.X),
                ("node_b", pair.signal, setting),
            ],
            OPERATING_PHASE,
            ("tomo", input_id.name),
            table,
        )
    assert table is not None
    return table


def _dataset_from_table(
    table: CoincidenceTable, cfg: ExperimentConfig, input_id: InputStateId
) -> TomoDataset:
    counts = {}
    for setting in _SETTINGS:
        tally = table.points[(OPERATING_PHASE, f"X/{setting.name}")]
        counts[setting] = heralded_counts(tally, setting, cfg.herald_basis_convention)
    return TomoDataset(counts, input_id=input_id.name, phase=OPERATING_PHASE)


def _target_bloch(target: np.ndarray) -> dict[MeasurementSetting, float]:
    rho = np.outer(target, target.conj())
    paulis = {
        MeasurementSetting.X: np.array([[0, 1], [1, 0]], dtype=complex),
        MeasurementSetting.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
        MeasurementSetting.Z: np.diag([1.0, -1.0]).astype(complex),
    }
    return {
        s: float(np.real(np.trace(rho @ p))) for s, p in paulis.items()
    }


def _fidelity_stderr(
    dataset: TomoDataset,
    variances: dict[MeasurementSetting, tuple[float, float]],
    target: np.ndarray,
) -> float:
    """Count-variance propagation through F = (1 + n . v)/2.

    For raw counts the cell variances are the counts themselves (Poisson),
    which reproduces the binomial error; for dark-deducted counts the
    variances come from propagating the raw fluctuations through the
    deduction kernel, which plug-in binomial errors would badly understate
    near empty cells.
    """
    weights = _target_bloch(target)
    var = 0.0
    for setting in _SETTINGS:
        a, b = dataset.counts[setting]
        va, vb = variances[setting]
        va, vb = max(va, 1.0), max(vb, 1.0)
        total = a + b
        if total <= 0:
            return float("inf")
        bloch_var = 4.0 * (b * b * va + a * a * vb) / total**4
        var += (weights[setting] ** 2) * bloch_var / 4.0
    return float(np.sqrt(var))


def _bootstrap_fidelity_stderr(
    dataset: TomoDataset, target: np.ndarray, resamples: int, seed: int
) -> float:
    """Bootstrap over shots with a fast linear-inversion estimator."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    weights = _target_bloch(target)
    values = []
    for _ in range(resamples):
        bloch = {}
        for setting in _SETTINGS:
            n_plus, n_minus = dataset.counts[setting]
            total = n_plus + n_minus
            redraw = rng.binomial(int(round(total)), n_plus / total)
            bloch[setting] = 2.0 * redraw / total - 1.0
        values.append(
            0.5 * (1.0 + sum(weights[s] * bloch[s] for s in _SETTINGS))
        )
    return float(np.std(values, ddof=1))


@dataclass
class StateRunData:
    """Everything measured for one benchmark input state."""

    input_id: InputStateId
    table: CoincidenceTable
    raw_dataset: TomoDataset
    deducted_dataset: TomoDataset
    target: np.ndarray
    raw_state: JointState
    deducted_state: JointState
    fidelity_raw: float
    fidelity_deducted: float
    fidelity_raw_err: float
    fidelity_deducted_err: float
    fidelity_exact: float | None


def run_state_benchmark(
    cfg: ExperimentConfig, input_id: InputStateId
) -> StateRunData:
    table = measure_state_table(cfg, input_id)
    if cfg.mode == "sampled":
        heralded = sum(t.heralded() for t in table.points.values())
        if heralded <= 0:
            raise StatisticsError(
                f"no herald events recorded for input {input_id.name}"
            )
    darks = _path_darks(cfg, table.paths)
    deducted_table = deduct_dark_counts(table, darks)
    variance_table = deducted_count_variances(table, darks)
    raw_dataset = _dataset_from_table(table, cfg, input_id)
    ded_dataset = _dataset_from_table(deducted_table, cfg, input_id)
    ded_variances = {
        setting: heralded_counts(
            variance_table.points[(OPERATING_PHASE, f"X/{setting.name}")],
            setting,
            cfg.herald_basis_convention,
        )
        for setting in _SETTINGS
    }
    target2 = ideal_target_vector(cfg, input_id)
    target3 = np.array([target2[0], target2[1], 0.0], dtype=complex)

    register = photon_register("reconstructed", BasisKind.POLARIZATION)
    raw_state = reconstruct_state(raw_dataset, register)
    ded_state = reconstruct_state(ded_dataset, register)
    f_raw = float(np.real(target3.conj() @ raw_state.rho @ target3))
    f_ded = float(np.real(target3.conj() @ ded_state.rho @ target3))

    f_exact = None
    if cfg.mode == "analytic":
        pair = build_single_node_state(cfg, input_id, OPERATING_PHASE)
        qubit = delivered_qubit_state(pair, cfg.herald_basis_convention)
        f_exact = float(np.real(target2.conj() @ qubit @ target2))

    return StateRunData(
        input_id=input_id,
        table=table,
        raw_dataset=raw_dataset,
        deducted_dataset=ded_dataset,
        target=target3,
        raw_state=raw_state,
        deducted_state=ded_state,
        fidelity_raw=f_raw,
        fidelity_deducted=f_ded,
        fidelity_raw_err=_fidelity_stderr(
            raw_dataset, dict(raw_dataset.counts), target2
        ),
        fidelity_deducted_err=_fidelity_stderr(ded_dataset, ded_variances, target2),
        fidelity_exact=f_exact,
    )


# ---------------------------------------------------------------------------
# fringe measurements


def measure_pair_point(
    cfg: ExperimentConfig,
    herald_setting: MeasurementSetting,
    signal_setting: MeasurementSetting,
    phase: float,
    input_id: InputStateId = InputStateId.D,
) -> PointTally:
    pair = build_single_node_state(cfg, input_id, phase)
    table = measure_point(
        cfg,
        pair.state,
        [("herald", pair.herald, herald_setting), ("node_b", pair.signal, signal_setting)],
        phase,
        ("pair", input_id.name),
    )
    label = f"{herald_setting.name}/{signal_setting.name}"
    return table.points[(phase, label)]


def single_node_sweep(
    cfg: ExperimentConfig, input_id: InputStateId = InputStateId.D
) -> tuple[list[tuple[float, str, float, float]], tuple[float, float, float]]:
    """Phase sweep of the herald/retrieved X-basis coincidence fractions."""
    rows: list[tuple[float, str, float, float]] = []
    series = []
    for phase in cfg.phase_grid:
        tally = measure_pair_point(
            cfg, MeasurementSetting.X, MeasurementSetting.X, phase, input_id
        )
        correlation, n_used = pair_correlation(tally)
        fraction = (1.0 + correlation) / 2.0
        rows.append((phase, "correlated", fraction, n_used))
        rows.append((phase, "anticorrelated", 1.0 - fraction, n_used))
        series.append((phase, fraction, n_used))
    fit = fit_visibility(series)
    return rows, fit


def two_node_sweeps(
    cfg: ExperimentConfig,
) -> tuple[list[tuple[float, str, float, float]], dict[str, tuple[float, float]]]:
    """Swept XX/YY/ZZ correlations of the retrieved photon pair.

    XX and YY oscillate with the read phase and are reported as fitted
    amplitudes (YY with the operating-point sign, which is negative for this
    state family); ZZ is phase independent and reported as a weighted mean.
    """
    convention = cfg.herald_basis_convention
    rows: list[tuple[float, str, float, float]] = []
    series: dict[str, list[tuple[float, float, float]]] = {"XX": [], "YY": [], "ZZ": []}
    for phase in cfg.phase_grid:
        two = build_two_node_state(cfg, phase)
        table: CoincidenceTable | None = None
        for setting in (MeasurementSetting.X, MeasurementSetting.Y, MeasurementSetting.Z):
            table = measure_point(
                cfg,
                two.state,
                [
                    ("herald", two.herald, MeasurementSetting.X),
                    ("node_a", two.signal_a, setting),
                    ("node_b", two.signal_b, setting),
                ],
                phase,
                ("two_node",),
                table,
            )
        assert table is not None
        for name, setting in (("XX", "X"), ("YY", "Y"), ("ZZ", "Z")):
            tally = table.points[(phase, f"X/{setting}/{setting}")]
            flip = name in ("XX", "YY")
            value, n_used = signal_correlation(tally, flip, convention)
            fraction = (1.0 + value) / 2.0
            rows.append((phase, f"{name}_correlated", fraction, n_used))
            series[name].append((phase, fraction, n_used))

    results: dict[str, tuple[float, float]] = {}
    for name in ("XX", "YY"):
        amplitude, _, err = fit_visibility(series[name])
        sign = 1.0 if name == "XX" else -1.0
        results[name] = (sign * amplitude, err)
    zz_vals = np.array([2.0 * f - 1.0 for _, f, _ in series["ZZ"]])
    zz_ns = np.array([n for _, _, n in series["ZZ"]])
    zz_errs = np.array(
        [2.0 * binomial_stderr((v + 1.0) / 2.0, n) for v, n in zip(zz_vals, zz_ns)]
    )
    zz_weights = 1.0 / np.maximum(zz_errs, 1e-12) ** 2
    zz = float(np.sum(zz_weights * zz_vals) / np.sum(zz_weights))
    zz_err = float(1.0 / np.sqrt(np.sum(zz_weights)))
    results["ZZ"] = (zz, zz_err)
    return rows, results


# ---------------------------------------------------------------------------
# top-level runs


def run_heralded_storage(
    cfg: ExperimentConfig, input_id: InputStateId = InputStateId.D
) -> RunResult:
    """Heralded storage and tomography of a single benchmark input state."""
    data = run_state_benchmark(cfg, input_id)
    report = RunReport("heralded_storage", _provenance(cfg, "heralded_storage"))
    rate, rate_err, _ = herald_statistics(list(data.table.points.values()))
    budget = (
        cfg.node_a.source_emission
        * cfg.node_b.eta_store
        * cfg.node_b.eta_patch
        * cfg.eta_t
        * _mean_detector_eff(cfg, "herald")
    )
    report.add("herald_rate", rate, rate_err, "binomial")
    report.add("herald_efficiency_budget", budget, 0.0, "configured-product")
    name = input_id.name
    if data.fidelity_exact is not None:
        report.add(f"state_fidelity_{name}_exact", data.fidelity_exact, 0.0, "exact-model")
    report.add(
        f"state_fidelity_{name}_raw",
        data.fidelity_raw,
        data.fidelity_raw_err,
        "ml-tomography+binomial",
    )
    report.add(
        f"state_fidelity_{name}_deducted",
        data.fidelity_deducted,
        data.fidelity_deducted_err,
        "ml-tomography+binomial",
    )
    if cfg.mode == "sampled" and cfg.bootstrap_resamples > 0:
        boot = _bootstrap_fidelity_stderr(
            data.raw_dataset,
            data.target[:2],
            cfg.bootstrap_resamples,
            seed=cfg.seed ^ 0xB007,
        )
        report.add(
            f"state_fidelity_{name}_raw_bootstrap_err", boot, 0.0, "bootstrap-linear"
        )
    artifacts = {
        f"tomo_counts_{name}_raw.csv": data.raw_dataset.to_csv(),
        f"tomo_counts_{name}_deducted.csv": data.deducted_dataset.to_csv(),
        f"coincidences_{name}.csv": data.table.to_csv(),
    }
    return RunResult(report, artifacts)


def run_single_node_suite(cfg: ExperimentConfig) -> RunResult:
    """Six-state benchmark, pair visibilities, and process tomography."""
    report = RunReport("single_node_suite", _provenance(cfg, "single_node_suite"))
    artifacts: dict[str, str] = {}

    states: dict[InputStateId, StateRunData] = {}
    for input_id in InputStateId:
        states[input_id] = run_state_benchmark(cfg, input_id)

    all_tallies = [
        tally for data in states.values() for tally in data.table.points.values()
    ]
    rate, rate_err, _ = herald_statistics(all_tallies)
    budget = (
        cfg.node_a.source_emission
        * cfg.node_b.eta_store
        * cfg.node_b.eta_patch
        * cfg.eta_t
        * _mean_detector_eff(cfg, "herald")
    )
    report.add("herald_rate", rate, rate_err, "binomial")
    report.add("herald_efficiency_budget", budget, 0.0, "configured-product")

    # pair correlations: V0 (both paths Z), V1 (X-basis fringe), YY point
    v0_tally = measure_pair_point(
        cfg, MeasurementSetting.Z, MeasurementSetting.Z, OPERATING_PHASE
    )
    v0, v0_n = pair_correlation(v0_tally)
    v0_err = 2.0 * binomial_stderr((1.0 + v0) / 2.0, v0_n)
    yy_tally = measure_pair_point(
        cfg, MeasurementSetting.Y, MeasurementSetting.Y, OPERATING_PHASE
    )
    yy_pair, yy_n = pair_correlation(yy_tally)
    yy_err = 2.0 * binomial_stderr((1.0 + yy_pair) / 2.0, yy_n)
    sweep_rows, (v1, _, v1_err) = single_node_sweep(cfg)
    artifacts["sweep_single.csv"] = sweep_csv(sweep_rows)

    report.add("visibility_fixed_zz", v0, v0_err, "coincidence-fraction")
    report.add("visibility_swept_xx", v1, v1_err, "fringe-fit")
    report.add("pair_yy", yy_pair, yy_err, "coincidence-fraction")
    f_e_vis = entanglement_fidelity_vis(v0, v1)
    f_e_vis_err = float(np.sqrt(v0_err**2 + 4.0 * v1_err**2) / 4.0)
    report.add("entanglement_fidelity_vis", f_e_vis, f_e_vis_err, "formula(V0,V1)")
    f_e_pauli = entanglement_fidelity_pauli(v1, yy_pair, v0)
    f_e_pauli_err = float(np.sqrt(v1_err**2 + yy_err**2 + v0_err**2) / 4.0)
    report.add(
        "entanglement_fidelity_pauli", f_e_pauli, f_e_pauli_err, "formula(XX,YY,ZZ)"
    )

    # per-state fidelities and averages
    raw_sum = ded_sum = raw_var = ded_var = 0.0
    for input_id in InputStateId:
        data = states[input_id]
        name = input_id.name
        if data.fidelity_exact is not None:
            report.add(
                f"state_fidelity_{name}_exact", data.fidelity_exact, 0.0, "exact-model"
            )
        report.add(
            f"state_fidelity_{name}_raw",
            data.fidelity_raw,
            data.fidelity_raw_err,
            "ml-tomography+binomial",
        )
        report.add(
            f"state_fidelity_{name}_deducted",
            data.fidelity_deducted,
            data.fidelity_deducted_err,
            "ml-tomography+binomial",
        )
        raw_sum += data.fidelity_raw
        ded_sum += data.fidelity_deducted
        raw_var += data.fidelity_raw_err**2
        ded_var += data.fidelity_deducted_err**2
        artifacts[f"tomo_counts_{name}_raw.csv"] = data.raw_dataset.to_csv()
        artifacts[f"tomo_counts_{name}_deducted.csv"] = data.deducted_dataset.to_csv()
        artifacts[f"coincidences_{name}.csv"] = data.table.to_csv()
    n_states = len(InputStateId)
    report.add(
        "state_fidelity_avg_raw",
        raw_sum / n_states,
        float(np.sqrt(raw_var)) / n_states,
        "mean-of-six",
    )
    report.add(
        "state_fidelity_avg_deducted",
        ded_sum / n_states,
        float(np.sqrt(ded_var)) / n_states,
        "mean-of-six",
    )

    _add_process_metrics(report, artifacts, states)
    report.verdicts.append(
        classical_limit_check("entanglement", min(max(f_e_vis, 0.0), 1.0))
    )
    return RunResult(report, artifacts)


def _add_process_metrics(
    report: RunReport,
    artifacts: dict[str, str],
    states: dict[InputStateId, StateRunData],
) -> None:
    """Process tomography from the four informationally complete inputs."""
    chi0 = identity_process()
    inputs = []
    outputs_raw = []
    outputs_ded = []
    for input_id in PROCESS_INPUTS:
        data = states[input_id]
        register = photon_register(f"in_{input_id.name}", BasisKind.POLARIZATION)
        inputs.append(JointState((register,), np.outer(data.target, data.target.conj())))
        outputs_raw.append(data.raw_state)
        outputs_ded.append(data.deducted_state)
    chi_raw = reconstruct_process(inputs, outputs_raw)
    chi_ded = reconstruct_process(inputs, outputs_ded)
    f_p_raw = process_fidelity(chi_raw, chi0)
    f_p_ded = process_fidelity(chi_ded, chi0)
    fp_err_proxy = float(
        np.sqrt(np.mean([states[i].fidelity_raw_err ** 2 for i in PROCESS_INPUTS]))
    )
    report.add("process_fidelity_raw", f_p_raw, fp_err_proxy, "ml-process+rms-proxy")
    report.add("process_fidelity_deducted", f_p_ded, fp_err_proxy, "ml-process+rms-proxy")
    report.matrices.append(("process matrix (raw)", chi_raw.chi))
    report.matrices.append(("process matrix (dark-deducted)", chi_ded.chi))
    artifacts["chi_raw.csv"] = matrix_csv(chi_raw.chi)
    artifacts["chi_deducted.csv"] = matrix_csv(chi_ded.chi)
    report.verdicts.append(classical_limit_check("process", f_p_raw))
    report.verdicts.append(classical_limit_check("process", f_p_ded))


def run_tomography(cfg: ExperimentConfig) -> RunResult:
    """Six-state benchmark plus process tomography, without the sweeps."""
    report = RunReport("tomography", _provenance(cfg, "tomography"))
    artifacts: dict[str, str] = {}
    states: dict[InputStateId, StateRunData] = {}
    raw_sum = ded_sum = raw_var = ded_var = 0.0
    for input_id in InputStateId:
        data = run_state_benchmark(cfg, input_id)
        states[input_id] = data
        name = input_id.name
        if data.fidelity_exact is not None:
            report.add(
                f"state_fidelity_{name}_exact", data.fidelity_exact, 0.0, "exact-model"
            )
        report.add(
            f"state_fidelity_{name}_raw",
            data.fidelity_raw,
            data.fidelity_raw_err,
            "ml-tomography+binomial",
        )
        report.add(
            f"state_fidelity_{name}_deducted",
            data.fidelity_deducted,
            data.fidelity_deducted_err,
            "ml-tomography+binomial",
        )
        raw_sum += data.fidelity_raw
        ded_sum += data.fidelity_deducted
        raw_var += data.fidelity_raw_err**2
        ded_var += data.fidelity_deducted_err**2
        artifacts[f"tomo_counts_{name}_raw.csv"] = data.raw_dataset.to_csv()
        artifacts[f"tomo_counts_{name}_deducted.csv"] = data.deducted_dataset.to_csv()
    n_states = len(InputStateId)
    report.add(
        "state_fidelity_avg_raw",
        raw_sum / n_states,
        float(np.sqrt(raw_var)) / n_states,
        "mean-of-six",
    )
    report.add(
        "state_fidelity_avg_deducted",
        ded_sum / n_states,
        float(np.sqrt(ded_var)) / n_states,
        "mean-of-six",
    )
    _add_process_metrics(report, artifacts, states)
    return RunResult(report, artifacts)


def run_full_report(cfg: ExperimentConfig) -> RunResult:
    """The complete battery: single-node suite plus the two-node protocol."""
    suite = run_single_node_suite(cfg)
    two = run_two_node(cfg)
    report = RunReport("full", _provenance(cfg, "full"))
    report.metrics.extend(suite.report.metrics)
    for metric in two.report.metrics:
        report.add(f"two_node_{metric.name}", metric.value, metric.err, metric.method)
    report.verdicts.extend(suite.report.verdicts)
    report.verdicts.extend(two.report.verdicts)
    report.matrices.extend(suite.report.matrices)
    artifacts = dict(suite.artifacts)
    artifacts.update(two.artifacts)
    return RunResult(report, artifacts)


def run_two_node(cfg: ExperimentConfig) -> RunResult:
    """Remote-entanglement protocol with swept verification correlators."""
    report = RunReport("two_node", _provenance(cfg, "two_node"))
    artifacts: dict[str, str] = {}
    rows, correlations = two_node_sweeps(cfg)
    artifacts["sweep_two_node.csv"] = sweep_csv(rows)

    xx, xx_err = correlations["XX"]
    yy, yy_err = correlations["YY"]
    zz, zz_err = correlations["ZZ"]
    report.add("pauli_xx", xx, xx_err, "fringe-fit")
    report.add("pauli_yy", yy, yy_err, "fringe-fit")
    report.add("pauli_zz", zz, zz_err, "weighted-mean")
    f_e = entanglement_fidelity_pauli(xx, yy, zz)
    f_e_err = float(np.sqrt(xx_err**2 + yy_err**2 + zz_err**2) / 4.0)
    report.add("entanglement_fidelity_pauli", f_e, f_e_err, "formula(XX,YY,ZZ)")

    if cfg.mode == "analytic":
        two = build_two_node_state(cfg, OPERATING_PHASE)
        exact = two_node_pauli_expectations(two, cfg.herald_basis_convention)
        report.add("pauli_xx_exact", exact[0], 0.0, "exact-model")
        report.add("pauli_yy_exact", exact[1], 0.0, "exact-model")
        report.add("pauli_zz_exact", exact[2], 0.0, "exact-model")
        report.add(
            "entanglement_fidelity_exact",
            entanglement_fidelity_pauli(*exact),
            0.0,
            "exact-model",
        )

    # herald statistics pooled over the sweep points
    two0 = build_two_node_state(cfg, cfg.phase_grid[0])
    table = measure_point(
        cfg,
        two0.state,
        [
            ("herald", two0.herald, MeasurementSetting.X),
            ("node_a", two0.signal_a, MeasurementSetting.Z),
            ("node_b", two0.signal_b, MeasurementSetting.Z),
        ],
        cfg.phase_grid[0],
        ("two_node_rate",),
    )
    rate, rate_err, _ = herald_statistics(list(table.points.values()))
    budget = (
        cfg.node_a.eta_patch
        * cfg.node_b.eta_store
        * cfg.node_b.eta_patch
        * cfg.eta_t
        * _mean_detector_eff(cfg, "herald")
    )
    report.add("herald_rate", rate, rate_err, "binomial")
    report.add("herald_efficiency_budget", budget, 0.0, "configured-product")

    report.verdicts.append(
        classical_limit_check("entanglement", min(max(f_e, 0.0), 1.0))
    )
    return RunResult(report, artifacts)


def phase_sweep(cfg: ExperimentConfig, protocol: str) -> RunResult:
    """Standalone sweep: CSV series plus the fitted visibility."""
    if len(cfg.phase_grid) < 4 or np.ptp(cfg.phase_grid) <= np.pi:
        raise StatisticsError("phase grid must hold >= 4 points spanning more than pi")
    report = RunReport(f"sweep_{protocol}", _provenance(cfg, f"sweep_{protocol}"))
    if protocol == "single":
        rows, (v, phi, v_err) = single_node_sweep(cfg)
        report.add("visibility", v, v_err, "fringe-fit")
        report.add("fringe_phase", phi, 0.0, "fringe-fit")
        return RunResult(report, {"sweep_single.csv": sweep_csv(rows)})
    if protocol == "two_node":
        rows, correlations = two_node_sweeps(cfg)
        for name in ("XX", "YY", "ZZ"):
            value, err = correlations[name]
            method = "weighted-mean" if name == "ZZ" else "fringe-fit"
            report.add(f"pauli_{name.lower()}", value, err, method)
        return RunResult(report, {"sweep_two_node.csv": sweep_csv(rows)})
    raise StatisticsError(f"unknown sweep protocol {protocol!r}")
