"""State reconstruction from three-setting counts, maximum-likelihood process
reconstruction, and fidelity metrics with classical-limit checks.

State MLE uses the square-root parameterization rho = T^dag T / Tr(T^dag T),
which is physical by construction; process MLE optimizes a least-squares
objective over the Choi matrix under positivity and trace-preservation
constraints, then converts to the Pauli-basis process matrix.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize

from .photonics import MeasurementSetting, setting_unitary
from .qstate import JointState, RegisterLabel, photon_register, trace_norm
from .qstate import BasisKind

#: Relative likelihood improvement below which solvers stop.
SOLVER_FTOL = 1e-10
#: Iteration cap for both reconstruction solvers.
SOLVER_MAX_ITER = 5000

PAULI_2 = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}
PAULI_ORDER = ("I", "X", "Y", "Z")


class TomographyError(ValueError):
    """Raised for invalid datasets or infeasible reconstructions."""


class ConvergenceError(RuntimeError):
    """Raised when a solver hits its iteration cap; carries the residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class TomoDataset:
    """Heralded (n_plus, n_minus) counts for each of the three settings."""

    counts: Mapping[MeasurementSetting, tuple[float, float]]
    input_id: str = ""
    phase: float = 0.0

    def __post_init__(self) -> None:
        cleaned: dict[MeasurementSetting, tuple[float, float]] = {}
        for setting in MeasurementSetting:
            if setting not in self.counts:
                raise TomographyError(f"missing counts for setting {setting.name}")
            n_plus, n_minus = self.counts[setting]
            if n_plus < -1e-9 or n_minus < -1e-9:
                raise TomographyError("counts must be nonnegative")
            n_plus, n_minus = max(n_plus, 0.0), max(n_minus, 0.0)
            if n_plus + n_minus <= 0:
                raise TomographyError(f"empty counts in setting {setting.name}")
            cleaned[setting] = (n_plus, n_minus)
        object.__setattr__(self, "counts", cleaned)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["setting", "outcome", "count"])
        for setting in MeasurementSetting:
            n_plus, n_minus = self.counts[setting]
            writer.writerow([setting.name, "plus", repr(float(n_plus))])
            writer.writerow([setting.name, "minus", repr(float(n_minus))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, input_id: str = "", phase: float = 0.0) -> "TomoDataset":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != ["setting", "outcome", "count"]:
            raise TomographyError("unexpected tomography CSV header")
        acc: dict[MeasurementSetting, dict[str, float]] = {}
        for row in reader:
            if len(row) != 3:
                raise TomographyError(f"malformed tomography CSV row: {row}")
            setting = MeasurementSetting[row[0]]
            acc.setdefault(setting, {})[row[1]] = float(row[2])
        counts = {
            s: (acc[s].get("plus", 0.0), acc[s].get("minus", 0.0)) for s in acc
        }
        return cls(counts, input_id=input_id, phase=phase)


def _setting_projectors(setting: MeasurementSetting) -> tuple[np.ndarray, np.ndarray]:
    u = setting_unitary(setting)[:2, :2]
    p_plus = u.conj().T @ np.diag([1.0, 0.0]).astype(complex) @ u
    return p_plus, np.eye(2, dtype=complex) - p_plus


# ---------------------------------------------------------------------------
# state MLE


@dataclass
class ReconstructionInfo:
    """Solver diagnostics: objective history is monotone non-increasing."""

    nll_history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _rho_from_params(params: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    t = np.array(
        [[params[0], 0.0], [params[2] + 1j * params[3], params[1]]], dtype=complex
    )
    gram = t.conj().T @ t
    norm = float(np.real(np.trace(gram)))
    return t, gram / norm, norm


def reconstruct_state_with_info(
    dataset: TomoDataset, register: RegisterLabel | None = None
) -> tuple[JointState, ReconstructionInfo]:
    """Maximum-likelihood qubit state from three-setting counts.

    Deterministic: fixed initialization at the maximally mixed state and a
    fixed stopping rule (relative NLL improvement below SOLVER_FTOL or
    SOLVER_MAX_ITER iterations, whichever first).
    """
    projectors = []
    counts = []
    for setting in MeasurementSetting:
        p_plus, p_minus = _setting_projectors(setting)
        n_plus, n_minus = dataset.counts[setting]
        projectors.extend([p_plus, p_minus])
        counts.append(n_plus)
        counts.append(n_minus)
    counts_arr = np.array(counts, dtype=float)
    total = counts_arr.sum()

    def nll_and_grad(params: np.ndarray) -> tuple[float, np.ndarray]:
        t, rho, norm = _rho_from_params(params)
        value = 0.0
        r_matrix = np.zeros((2, 2), dtype=complex)
        for n, proj in zip(counts_arr, projectors):
            if n == 0.0:
                continue
            p = max(float(np.real(np.trace(rho @ proj))), 1e-300)
            value -= n * np.log(p)
            r_matrix += (n / p) * proj
        grad_t = -(t @ r_matrix - total * t) / norm
        grad = np.array(
            [
                2.0 * np.real(grad_t[0, 0]),
                2.0 * np.real(grad_t[1, 1]),
                2.0 * np.real(grad_t[1, 0]),
                2.0 * np.imag(grad_t[1, 0]),
            ]
        )
        return value, grad

    info = ReconstructionInfo()

    def track(params: np.ndarray) -> None:
        info.nll_history.append(nll_and_grad(params)[0])

    x0 = np.array([1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0), 0.0, 0.0])
    track(x0)
    result = optimize.minimize(
        nll_and_grad,
        x0,
        jac=True,
        method="L-BFGS-B",
        callback=track,
        options={"ftol": SOLVER_FTOL, "gtol": 1e-12, "maxiter": SOLVER_MAX_ITER},
    )
    info.iterations = int(result.nit)
    info.converged = bool(result.success) or result.status == 0
    if result.status == 1:  # iteration cap
        raise ConvergenceError(
            "state reconstruction hit the iteration cap",
            float(np.linalg.norm(result.jac)),
        )
    _, rho, _ = _rho_from_params(result.x)
    if register is None:
        register = photon_register("reconstructed", BasisKind.POLARIZATION)
    full = np.zeros((3, 3), dtype=complex)
    full[:2, :2] = (rho + rho.conj().T) / 2.0
    return JointState((register,), full), info


def reconstruct_state(
    dataset: TomoDataset, register: RegisterLabel | None = None
) -> JointState:
    return reconstruct_state_with_info(dataset, register)[0]


# ---------------------------------------------------------------------------
# process matrix and Choi conversions


@dataclass(frozen=True)
class ProcessMatrix:
    """4x4 Hermitian PSD unit-trace matrix in the {I, X, Y, Z} operator basis."""

    chi: np.ndarray

    def __post_init__(self) -> None:
        chi = np.array(self.chi, dtype=complex)
        if chi.shape != (4, 4):
            raise TomographyError("process matrix must be 4x4")
        if np.max(np.abs(chi - chi.conj().T)) > 1e-8:
            raise TomographyError("process matrix must be Hermitian")
        evals = np.linalg.eigvalsh(chi)
        if evals[0] < -1e-8:
            raise TomographyError(f"process matrix not PSD (min eig {evals[0]:.2e})")
        if abs(float(np.real(np.trace(chi))) - 1.0) > 1e-9:
            raise TomographyError("process matrix trace must be 1")
        chi.setflags(write=False)
        object.__setattr__(self, "chi", chi)

    def element(self, row: str, col: str) -> complex:
        return complex(self.chi[PAULI_ORDER.index(row), PAULI_ORDER.index(col)])


def identity_process() -> ProcessMatrix:
    chi = np.zeros((4, 4), dtype=complex)
    chi[0, 0] = 1.0
    return ProcessMatrix(chi)


def apply_process(chi: ProcessMatrix | np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Channel action rho -> sum_mn chi_mn sigma_m rho sigma_n."""
    mat = chi.chi if isinstance(chi, ProcessMatrix) else np.asarray(chi, dtype=complex)
    out = np.zeros((2, 2), dtype=complex)
    for m, name_m in enumerate(PAULI_ORDER):
        for n, name_n in enumerate(PAULI_ORDER):
            if mat[m, n] != 0:
                out += mat[m, n] * PAULI_2[name_m] @ rho @ PAULI_2[name_n]
    return out


def _pauli_choi_vectors() -> np.ndarray:
    """Columns v_m = (I otimes sigma_m)|Omega> with |Omega> = |00> + |11>."""
    omega = np.zeros(4, dtype=complex)
    omega[0] = 1.0
    omega[3] = 1.0
    vecs = []
    for name in PAULI_ORDER:
        vecs.append(np.kron(np.eye(2, dtype=complex), PAULI_2[name]) @ omega)
    return np.column_stack(vecs)


_CHOI_VECS = _pauli_choi_vectors()


def chi_from_choi(choi: np.ndarray) -> np.ndarray:
    """Pauli-basis process matrix from an input-first Choi matrix."""
    return _CHOI_VECS.conj().T @ choi @ _CHOI_VECS / 4.0


def choi_from_chi(chi: np.ndarray) -> np.ndarray:
    return _CHOI_VECS @ np.asarray(chi, dtype=complex) @ _CHOI_VECS.conj().T


def _choi_apply(choi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """E(rho) = Tr_in[(rho^T otimes I) J]."""
    j = choi.reshape(2, 2, 2, 2)  # (in, out, in', out')
    return np.einsum("ij,ikjl->kl", rho.T, j)


def _choi_adjoint(rho: np.ndarray, m: np.ndarray) -> np.ndarray:
    return np.kron(rho.T, m)


def _trace_out_output(choi: np.ndarray) -> np.ndarray:
    j = choi.reshape(2, 2, 2, 2)
    return np.einsum("ikjk->ij", j)


# ---------------------------------------------------------------------------
# process MLE


def _project_psd(m: np.ndarray) -> np.ndarray:
    herm = (m + m.conj().T) / 2.0
    evals, evecs = np.linalg.eigh(herm)
    evals = np.maximum(evals, 0.0)
    return (evecs * evals) @ evecs.conj().T


def _project_tp(choi: np.ndarray) -> np.ndarray:
    deficit = np.eye(2, dtype=complex) - _trace_out_output(choi)
    return choi + np.kron(deficit / 2.0, np.eye(2, dtype=complex))


def _project_cptp(choi: np.ndarray, trace_preserving: bool) -> np.ndarray:
    """Dykstra alternating projection onto the PSD (and TP) set."""
    if not trace_preserving:
        return _project_psd(choi)
    x = choi.copy()
    p_inc = np.zeros_like(x)
    q_inc = np.zeros_like(x)
    for _ in range(300):
        y = _project_psd(x + p_inc)
        p_inc = x + p_inc - y
        x_new = _project_tp(y + q_inc)
        q_inc = y + q_inc - x_new
        psd_gap = float(min(np.linalg.eigvalsh((x_new + x_new.conj().T) / 2.0)[0], 0.0))
        tp_gap = float(np.max(np.abs(_trace_out_output(x_new) - np.eye(2))))
        x = x_new
        if tp_gap < 1e-13 and psd_gap > -1e-13:
            break
    return x


def _informationally_complete(rhos: Sequence[np.ndarray]) -> bool:
    stacked = np.column_stack([r.reshape(-1) for r in rhos])
    return np.linalg.matrix_rank(stacked, tol=1e-9) == 4


def _qubit_sector(state: JointState) -> np.ndarray:
    if state.num_registers != 1:
        raise TomographyError("process tomography expects single-register states")
    rho = np.asarray(state.rho)[:2, :2]
    tr = float(np.real(np.trace(rho)))
    if abs(tr - state.trace()) > 1e-9 or abs(tr - 1.0) > 1e-6:
        raise TomographyError("state has weight outside the qubit sector")
    return rho / tr


def reconstruct_process_with_info(
    inputs: Sequence[JointState],
    outputs: Sequence[JointState],
    trace_preserving: bool = True,
) -> tuple[ProcessMatrix, ReconstructionInfo]:
    """Constrained least-squares estimate of the process matrix.

    Minimizes sum_k ||E(rho_k) - rho_out_k||_F^2 over Choi matrices subject
    to PSD (and, by default, trace preservation).  If the unconstrained
    linear-inversion optimum already satisfies the constraints it is returned
    directly (it is then the exact maximum-likelihood solution); otherwise a
    projected-gradient descent runs from the maximally mixed process.
    """
    if len(inputs) != 4 or len(outputs) != 4:
        raise TomographyError("process tomography needs exactly 4 input/output pairs")
    rho_in = [_qubit_sector(s) for s in inputs]
    rho_out = [_qubit_sector(s) for s in outputs]
    if not _informationally_complete(rho_in):
        raise TomographyError("input states are not informationally complete")

    # Linear inversion: solve sum_k basis expansion exactly.
    # Vectorize: A vec(J) = vec(rho_out_k) with A rows from Tr_in contraction.
    a_rows = []
    b_entries = []
    for rin, rout in zip(rho_in, rho_out):
        contraction = np.zeros((4, 16), dtype=complex)
        for out_i in range(2):
            for out_j in range(2):
                basis_m = np.zeros((2, 2), dtype=complex)
                basis_m[out_i, out_j] = 1.0
                # <E_ij , E(rho)> row: Tr[(rho^T (x) E_ij^dag) J]
                weight = _choi_adjoint(rin, basis_m).conj()
                contraction[2 * out_i + out_j] = weight.reshape(-1)
        a_rows.append(contraction)
        b_entries.append(rout.reshape(-1))
    a_mat = np.vstack(a_rows)
    b_vec = np.concatenate(b_entries)
    j_lin, *_ = np.linalg.lstsq(a_mat, b_vec, rcond=None)
    j_lin = j_lin.reshape(4, 4)
    j_lin = (j_lin + j_lin.conj().T) / 2.0

    info = ReconstructionInfo()
    min_eig = float(np.linalg.eigvalsh(j_lin)[0])
    tp_gap = float(np.max(np.abs(_trace_out_output(j_lin) - np.eye(2))))
    feasible = min_eig >= -1e-10 and (not trace_preserving or tp_gap <= 1e-10)
    if feasible:
        choi = _project_cptp(j_lin, trace_preserving)
        info.converged = True
        info.nll_history.append(0.0)
    else:
        choi = np.eye(4, dtype=complex) / 2.0  # maximally mixed process

        def objective(j: np.ndarray) -> float:
            return sum(
                float(np.linalg.norm(_choi_apply(j, rin) - rout) ** 2)
                for rin, rout in zip(rho_in, rho_out)
            )

        def gradient(j: np.ndarray) -> np.ndarray:
            grad = np.zeros_like(j)
            for rin, rout in zip(rho_in, rho_out):
                grad += 2.0 * _choi_adjoint(rin, _choi_apply(j, rin) - rout)
            return grad

        # Lipschitz bound by power iteration on the quadratic form.
        probe = np.eye(4, dtype=complex) / 2.0
        lipschitz = 1.0
        for _ in range(60):
            nxt = np.zeros_like(probe)
            for rin in rho_in:
                nxt += 2.0 * _choi_adjoint(rin, _choi_apply(probe, rin))
            lipschitz = float(np.linalg.norm(nxt))
            probe = nxt / max(lipschitz, 1e-30)
        step = 1.0 / (1.05 * max(lipschitz, 1e-12))

        value = objective(choi)
        info.nll_history.append(value)
        for iteration in range(SOLVER_MAX_ITER):
            candidate = _project_cptp(choi - step * gradient(choi), trace_preserving)
            new_value = objective(candidate)
            if new_value > value + 1e-15:
                step *= 0.5  # safeguarded backtrack keeps the loss monotone
                if step < 1e-18:
                    break
                continue
            choi = candidate
            improvement = value - new_value
            info.nll_history.append(new_value)
            info.iterations = iteration + 1
            scale = max(abs(value), 1.0)
            value = new_value
            if improvement / scale < SOLVER_FTOL:
                info.converged = True
                break
        if not info.converged:
            raise ConvergenceError(
                "process reconstruction hit the iteration cap", value
            )

    chi = chi_from_choi(choi)
    chi = (chi + chi.conj().T) / 2.0
    # trim numerically tiny constraint violations before validation
    evals, evecs = np.linalg.eigh(chi)
    evals = np.maximum(evals, 0.0)
    chi = (evecs * evals) @ evecs.conj().T
    chi /= np.real(np.trace(chi))
    return ProcessMatrix(chi), info


def reconstruct_process(
    inputs: Sequence[JointState],
    outputs: Sequence[JointState],
    trace_preserving: bool = True,
) -> ProcessMatrix:
    return reconstruct_process_with_info(inputs, outputs, trace_preserving)[0]


# ---------------------------------------------------------------------------
# fidelity metrics


def process_fidelity(chi: ProcessMatrix, chi0: ProcessMatrix) -> float:
    """1 - (1/2)||chi0 - chi||_tr, symmetric in its arguments."""
    return 1.0 - 0.5 * trace_norm(chi0.chi - chi.chi)


def _checked_correlation(name: str, value: float) -> float:
    # tolerate floating-point excursions just past the physical boundary
    if not -1.0 - 1e-9 <= value <= 1.0 + 1e-9:
        raise TomographyError(f"{name}={value} outside [-1, 1]")
    return min(max(value, -1.0), 1.0)


def entanglement_fidelity_vis(v0: float, v1: float) -> float:
    """(1 + V0 + 2 V1)/4 from the two fringe visibilities."""
    v0 = _checked_correlation("V0", v0)
    v1 = _checked_correlation("V1", v1)
    return (1.0 + v0 + 2.0 * v1) / 4.0


def entanglement_fidelity_pauli(xx: float, yy: float, zz: float) -> float:
    """(1 + <XX> - <YY> + <ZZ>)/4 from the three joint Pauli expectations."""
    xx = _checked_correlation("xx", xx)
    yy = _checked_correlation("yy", yy)
    zz = _checked_correlation("zz", zz)
    return (1.0 + xx - yy + zz) / 4.0


CLASSICAL_LIMITS = {"process": 0.69, "entanglement": 0.50}


@dataclass(frozen=True)
class LimitVerdict:
    metric: str
    value: float
    threshold: float
    passed: bool
    margin: float


def classical_limit_check(metric: str, value: float) -> LimitVerdict:
    """Strict comparison of a fidelity against its classical threshold."""
    if metric not in CLASSICAL_LIMITS:
        raise TomographyError(f"unknown metric {metric!r}")
    if not 0.0 <= value <= 1.0:
        raise TomographyError(f"fidelity {value} outside [0, 1]")
    threshold = CLASSICAL_LIMITS[metric]
    return LimitVerdict(metric, value, threshold, value > threshold, value - threshold)


def matrix_report(title: str, matrix: np.ndarray) -> str:
    """Structured text block: row-major real and imaginary parts."""
    lines = [title]
    arr = np.asarray(matrix, dtype=complex)
    lines.append("  real:")
    for row in arr.real:
        lines.append("    " + " ".join(f"{x: .6f}" for x in row))
    lines.append("  imag:")
    for row in arr.imag:
        lines.append("    " + " ".join(f"{x: .6f}" for x in row))
    return "\n".join(lines) + "\n"
