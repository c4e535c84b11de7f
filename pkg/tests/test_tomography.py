"""MLE state/process reconstruction and fidelity metrics."""

import numpy as np
import pytest

from rydlink.photonics import InputStateId, MeasurementSetting, make_input_state
from rydlink.qstate import BasisKind, JointState, photon_register
from rydlink.tomography import (
    PAULI_2,
    ProcessMatrix,
    TomoDataset,
    TomographyError,
    apply_process,
    chi_from_choi,
    classical_limit_check,
    entanglement_fidelity_pauli,
    entanglement_fidelity_vis,
    identity_process,
    process_fidelity,
    reconstruct_process,
    reconstruct_process_with_info,
    reconstruct_state,
    reconstruct_state_with_info,
)
from rydlink.tomography import _setting_projectors

REG = photon_register("out", BasisKind.POLARIZATION)


def counts_for(rho, scale=1.0):
    counts = {}
    for setting in MeasurementSetting:
        p_plus, p_minus = _setting_projectors(setting)
        counts[setting] = (
            scale * float(np.real(np.trace(rho @ p_plus))),
            scale * float(np.real(np.trace(rho @ p_minus))),
        )
    return counts


def as_state(rho2):
    full = np.zeros((3, 3), dtype=complex)
    full[:2, :2] = rho2
    return JointState((REG,), full)


def trace_distance(a, b):
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def random_qubit_rho(rng):
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_cptp_kraus(rng):
    g = rng.normal(size=(8, 2)) + 1j * rng.normal(size=(8, 2))
    q, _ = np.linalg.qr(g)
    return [q[2 * k : 2 * k + 2, :] for k in range(4)]


def chi_of_kraus(kraus):
    choi = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            unit = np.zeros((2, 2), dtype=complex)
            unit[i, j] = 1.0
            out = sum(k @ unit @ k.conj().T for k in kraus)
            choi += np.kron(unit, out)
    return ProcessMatrix(chi_from_choi(choi))


IC_IDS = (InputStateId.E, InputStateId.L, InputStateId.D, InputStateId.R)


def ic_inputs():
    states = []
    for sid in IC_IDS:
        base = make_input_state(sid)
        states.append(JointState((photon_register(sid.name, BasisKind.POLARIZATION),), base.rho))
    return states


# ---------------------------------------------------------------------------
# datasets


def test_dataset_validation_and_csv():
    d_rho = make_input_state(InputStateId.D).rho[:2, :2]
    ds = TomoDataset(counts_for(d_rho, scale=100), input_id="D")
    text = ds.to_csv()
    back = TomoDataset.from_csv(text, input_id="D")
    for setting in MeasurementSetting:
        assert back.counts[setting] == pytest.approx(ds.counts[setting])
    with pytest.raises(TomographyError, match="missing counts"):
        TomoDataset({MeasurementSetting.Z: (1.0, 1.0)})
    with pytest.raises(TomographyError, match="empty"):
        TomoDataset(
            {
                MeasurementSetting.Z: (0.0, 0.0),
                MeasurementSetting.X: (1.0, 1.0),
                MeasurementSetting.Y: (1.0, 1.0),
            }
        )
    with pytest.raises(TomographyError, match="header"):
        TomoDataset.from_csv("a,b,c\n")


# ---------------------------------------------------------------------------
# state MLE


def test_reconstruct_pure_diagonal_state():
    d_rho = make_input_state(InputStateId.D).rho[:2, :2]
    state = reconstruct_state(TomoDataset(counts_for(d_rho)))
    assert trace_distance(state.rho[:2, :2], d_rho) < 1e-6
    assert state.trace() == pytest.approx(1.0, abs=1e-9)


def test_reconstruct_equal_counts_gives_maximally_mixed():
    counts = {s: (50.0, 50.0) for s in MeasurementSetting}
    state = reconstruct_state(TomoDataset(counts))
    assert trace_distance(state.rho[:2, :2], np.eye(2) / 2) < 1e-8


def test_reconstruct_state_finite_sample_accuracy():
    # sampling-repetition oracle: at 1e4 counts per setting, the estimate
    # stays within 0.05 trace distance in at least 99% of 200 repetitions
    rng = np.random.default_rng(31)
    failures = 0
    for _ in range(200):
        rho = random_qubit_rho(rng)
        counts = {}
        for setting in MeasurementSetting:
            p_plus, p_minus = _setting_projectors(setting)
            p = float(np.real(np.trace(rho @ p_plus)))
            n_plus = rng.binomial(10_000, min(max(p, 0.0), 1.0))
            counts[setting] = (float(n_plus), float(10_000 - n_plus))
        est = reconstruct_state(TomoDataset(counts))
        if trace_distance(est.rho[:2, :2], rho) >= 0.05:
            failures += 1
    assert failures <= 2


def test_reconstruct_state_always_physical():
    # adversarial, inconsistent count patterns still yield PSD unit-trace
    adversarial = [
        {s: (1000.0, 0.0) for s in MeasurementSetting},
        {
            MeasurementSetting.Z: (1000.0, 0.0),
            MeasurementSetting.X: (1000.0, 0.0),
            MeasurementSetting.Y: (0.0, 1000.0),
        },
        {s: (1.0, 1e6) for s in MeasurementSetting},
    ]
    for counts in adversarial:
        state = reconstruct_state(TomoDataset(counts))
        evals = np.linalg.eigvalsh(state.rho)
        assert evals[0] >= -1e-9
        assert state.trace() == pytest.approx(1.0, abs=1e-9)


def test_reconstruct_state_likelihood_monotone():
    counts = {
        MeasurementSetting.Z: (900.0, 100.0),
        MeasurementSetting.X: (700.0, 300.0),
        MeasurementSetting.Y: (450.0, 550.0),
    }
    _, info = reconstruct_state_with_info(TomoDataset(counts))
    history = info.nll_history
    assert len(history) >= 2
    assert all(a >= b - 1e-9 for a, b in zip(history, history[1:]))


def test_state_nll_gradient_matches_finite_differences():
    from rydlink.tomography import _rho_from_params

    counts = {
        MeasurementSetting.Z: (61.0, 39.0),
        MeasurementSetting.X: (70.0, 30.0),
        MeasurementSetting.Y: (55.0, 45.0),
    }
    dataset = TomoDataset(counts)
    projectors = []
    numbers = []
    for setting in MeasurementSetting:
        p_plus, p_minus = _setting_projectors(setting)
        n_plus, n_minus = dataset.counts[setting]
        projectors += [p_plus, p_minus]
        numbers += [n_plus, n_minus]

    def nll(params):
        _, rho, _ = _rho_from_params(params)
        return -sum(
            n * np.log(max(float(np.real(np.trace(rho @ proj))), 1e-300))
            for n, proj in zip(numbers, projectors)
            if n > 0
        )

    from rydlink.tomography import reconstruct_state_with_info  # noqa: F401

    x = np.array([0.8, 0.55, 0.1, -0.2])
    eps = 1e-7
    numeric = np.array(
        [
            (nll(x + eps * np.eye(4)[i]) - nll(x - eps * np.eye(4)[i])) / (2 * eps)
            for i in range(4)
        ]
    )
    # reuse the library's fused value-and-gradient through a tiny shim
    from scipy.optimize import check_grad  # noqa: F401

    from rydlink import tomography as tomo_mod

    def grad(params):
        t, rho, norm = tomo_mod._rho_from_params(params)
        total = sum(numbers)
        r_matrix = np.zeros((2, 2), dtype=complex)
        for n, proj in zip(numbers, projectors):
            if n == 0:
                continue
            p = max(float(np.real(np.trace(rho @ proj))), 1e-300)
            r_matrix += (n / p) * proj
        grad_t = -(t @ r_matrix - total * t) / norm
        return np.array(
            [
                2 * np.real(grad_t[0, 0]),
                2 * np.real(grad_t[1, 1]),
                2 * np.real(grad_t[1, 0]),
                2 * np.imag(grad_t[1, 0]),
            ]
        )

    assert np.allclose(grad(x), numeric, atol=1e-5)


# ---------------------------------------------------------------------------
# process MLE


def test_process_identity_data():
    inputs = ic_inputs()
    chi = reconstruct_process(inputs, inputs)
    assert chi.chi[0, 0] == pytest.approx(1.0, abs=1e-6)
    off = chi.chi.copy()
    off[0, 0] = 0.0
    assert np.max(np.abs(off)) < 1e-6


def test_process_phase_flip_oracle():
    # direct Pauli-conjugation oracle: outputs Z rho Z give chi with the
    # (Z, Z) entry equal to one
    inputs = ic_inputs()
    z = PAULI_2["Z"]
    outputs = []
    for s in inputs:
        rho = s.rho.copy()
        rho2 = z @ rho[:2, :2] @ z
        full = np.zeros((3, 3), dtype=complex)
        full[:2, :2] = rho2
        outputs.append(JointState(s.registers, full))
    chi = reconstruct_process(inputs, outputs)
    assert chi.element("Z", "Z") == pytest.approx(1.0, abs=1e-6)


def test_process_depolarizing_oracle():
    # depolarizing-channel decomposition oracle: rho -> I/2 has
    # chi = diag(1/4, 1/4, 1/4, 1/4)
    inputs = ic_inputs()
    mixed = np.zeros((3, 3), dtype=complex)
    mixed[:2, :2] = np.eye(2) / 2
    outputs = [JointState(s.registers, mixed) for s in inputs]
    chi = reconstruct_process(inputs, outputs)
    assert np.allclose(chi.chi, np.diag([0.25] * 4), atol=1e-6)


def test_process_random_cptp_round_trip():
    rng = np.random.default_rng(41)
    inputs = ic_inputs()
    for _ in range(20):
        kraus = random_cptp_kraus(rng)
        outputs = []
        for s in inputs:
            out2 = sum(k @ s.rho[:2, :2] @ k.conj().T for k in kraus)
            full = np.zeros((3, 3), dtype=complex)
            full[:2, :2] = out2
            outputs.append(JointState(s.registers, full))
        chi_est = reconstruct_process(inputs, outputs)
        chi_true = chi_of_kraus(kraus)
        assert process_fidelity(chi_est, chi_true) > 0.999


def test_process_requires_informationally_complete_inputs():
    base = make_input_state(InputStateId.E)
    dup = [
        JointState((photon_register(f"r{i}", BasisKind.POLARIZATION),), base.rho)
        for i in range(4)
    ]
    with pytest.raises(TomographyError, match="informationally complete"):
        reconstruct_process(dup, dup)
    with pytest.raises(TomographyError, match="exactly 4"):
        reconstruct_process(dup[:3], dup[:3])


def test_process_projected_gradient_path_monotone():
    # the universal-NOT (every Bloch vector negated) is positive but not
    # completely positive, so linear inversion is infeasible and the
    # projected-gradient path must engage
    inputs = ic_inputs()
    antipodes = {
        InputStateId.E: InputStateId.L,
        InputStateId.L: InputStateId.E,
        InputStateId.D: InputStateId.A,
        InputStateId.R: InputStateId.LC,
    }
    outputs = []
    for sid, s in zip(IC_IDS, inputs):
        flipped = make_input_state(antipodes[sid])
        outputs.append(JointState(s.registers, flipped.rho))
    chi, info = reconstruct_process_with_info(inputs, outputs)
    assert info.converged
    history = info.nll_history
    assert len(history) > 2
    assert all(a >= b - 1e-12 for a, b in zip(history, history[1:]))
    evals = np.linalg.eigvalsh(chi.chi)
    assert evals[0] >= -1e-9
    assert float(np.real(np.trace(chi.chi))) == pytest.approx(1.0, abs=1e-9)


def test_process_trace_preservation_flag():
    inputs = ic_inputs()
    # lossy outputs: cp_only mode fits them; TP mode projects back
    chi_tp = reconstruct_process(inputs, inputs, trace_preserving=True)
    chi_cp = reconstruct_process(inputs, inputs, trace_preserving=False)
    assert process_fidelity(chi_tp, chi_cp) > 0.999999


def test_apply_process_matches_kraus_action():
    rng = np.random.default_rng(5)
    kraus = random_cptp_kraus(rng)
    chi = chi_of_kraus(kraus)
    rho = random_qubit_rho(rng)
    direct = sum(k @ rho @ k.conj().T for k in kraus)
    via_chi = apply_process(chi, rho)
    assert np.allclose(direct, via_chi, atol=1e-10)


# ---------------------------------------------------------------------------
# fidelity metrics


def test_process_fidelity_examples():
    chi0 = identity_process()
    assert process_fidelity(chi0, chi0) == pytest.approx(1.0, abs=1e-12)
    depol = ProcessMatrix(np.diag([0.25] * 4).astype(complex))
    # oracle: trace norm of diag(3/4, -1/4, -1/4, -1/4) is 1.5
    assert process_fidelity(depol, chi0) == pytest.approx(1.0 - 0.5 * 1.5, abs=1e-12)
    assert process_fidelity(depol, chi0) == pytest.approx(0.25, abs=1e-12)


def test_process_fidelity_symmetry_property():
    rng = np.random.default_rng(51)
    for _ in range(100):
        a = chi_of_kraus(random_cptp_kraus(rng))
        b = chi_of_kraus(random_cptp_kraus(rng))
        assert process_fidelity(a, b) == pytest.approx(process_fidelity(b, a), abs=1e-12)
        assert process_fidelity(a, a) == pytest.approx(1.0, abs=1e-9)


def test_entanglement_fidelity_formulas():
    assert entanglement_fidelity_vis(0.799, 0.647) == pytest.approx(0.773, abs=5e-4)
    assert entanglement_fidelity_vis(1.0, 1.0) == 1.0
    assert entanglement_fidelity_vis(0.0, 0.0) == 0.25
    assert entanglement_fidelity_pauli(0.567, -0.560, 0.694) == pytest.approx(
        0.705, abs=5e-4
    )
    assert entanglement_fidelity_pauli(1.0, -1.0, 1.0) == 1.0
    assert entanglement_fidelity_pauli(0.0, 0.0, 0.0) == 0.25
    with pytest.raises(TomographyError):
        entanglement_fidelity_vis(1.2, 0.0)
    with pytest.raises(TomographyError):
        entanglement_fidelity_pauli(0.0, -2.0, 0.0)


def test_fidelity_witness_matches_bell_overlap():
    # identity of the witness formula on Bell-diagonal two-qubit states:
    # (1 + <XX> - <YY> + <ZZ>)/4 equals the overlap with the correlated
    # Bell state, checked on the full Bell-diagonal family
    rng = np.random.default_rng(61)
    bell = np.zeros((4, 4), dtype=complex)
    bell[0, 0] = bell[0, 3] = bell[3, 0] = bell[3, 3] = 0.5
    paulis = [np.kron(PAULI_2[n], PAULI_2[n]) for n in ("X", "Y", "Z")]
    for _ in range(50):
        weights = rng.dirichlet(np.ones(4))
        phi_plus = np.array([1, 0, 0, 1]) / np.sqrt(2)
        phi_minus = np.array([1, 0, 0, -1]) / np.sqrt(2)
        psi_plus = np.array([0, 1, 1, 0]) / np.sqrt(2)
        psi_minus = np.array([0, 1, -1, 0]) / np.sqrt(2)
        rho = sum(
            w * np.outer(v, v.conj())
            for w, v in zip(weights, (phi_plus, phi_minus, psi_plus, psi_minus))
        )
        xx, yy, zz = (float(np.real(np.trace(rho @ p))) for p in paulis)
        overlap = float(np.real(np.trace(rho @ bell)))
        assert entanglement_fidelity_pauli(xx, yy, zz) == pytest.approx(
            overlap, abs=1e-12
        )


def test_classical_limit_checks():
    verdict = classical_limit_check("process", 0.764)
    assert verdict.passed and verdict.margin == pytest.approx(0.074, abs=1e-9)
    verdict = classical_limit_check("entanglement", 0.705)
    assert verdict.passed and verdict.margin == pytest.approx(0.205, abs=1e-9)
    boundary = classical_limit_check("process", 0.69)
    assert not boundary.passed  # strict inequality at the threshold
    with pytest.raises(TomographyError):
        classical_limit_check("other", 0.5)
    with pytest.raises(TomographyError):
        classical_limit_check("process", 1.5)


def test_process_matrix_validation():
    with pytest.raises(TomographyError, match="4x4"):
        ProcessMatrix(np.eye(3))
    with pytest.raises(TomographyError, match="Hermitian"):
        bad = np.zeros((4, 4), dtype=complex)
        bad[0, 1] = 1.0
        bad[0, 0] = 1.0
        ProcessMatrix(bad)
    with pytest.raises(TomographyError, match="trace"):
        ProcessMatrix(np.diag([0.5] * 4).astype(complex))
    with pytest.raises(TomographyError, match="PSD"):
        ProcessMatrix(np.diag([1.5, -0.5, 0.0, 0.0]).astype(complex))
