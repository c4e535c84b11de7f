"""Dense complex linear algebra for small multi-register quantum states.

Every register is a 3-level system: two qubit levels (indices 0, 1) plus an
"absence" level at index 2 (atomic ground state or photonic vacuum).  States
are carried as unnormalized density matrices whose trace is the probability
of the branch they describe, so heralding probabilities and efficiency
budgets compose without side bookkeeping.  All values are immutable after
construction and all operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

#: Absolute tolerance for matrix equality and Hermiticity checks.
EPS_MAT = 1e-10
#: Absolute tolerance on eigenvalues for positive-semidefiniteness checks.
EPS_PSD = 1e-9

#: Dimension of every register (qubit pair + absence level).
LEVELS = 3

#: Index of the absence level (ground / vacuum) in every register basis.
ABSENCE = 2


class QStateError(ValueError):
    """Raised when a state, channel or operation violates its contract."""


class RegisterKind(Enum):
    ATOM_A = "atom_a"
    ATOM_B = "atom_b"
    PHOTON = "photon"


class BasisKind(Enum):
    """Fixes the physical meaning of the three levels of a register."""

    ATOM = ("R1", "R2", "G")
    TIME_BIN = ("tE", "tL", "vac")
    POLARIZATION = ("V", "H", "vac")

    @property
    def level_names(self) -> tuple[str, str, str]:
        return self.value


@dataclass(frozen=True)
class RegisterLabel:
    """Names one subsystem and fixes its basis semantics.

    Labels must be unique within a :class:`JointState`.
    """

    kind: RegisterKind
    id: str
    basis: BasisKind

    def with_basis(self, basis: BasisKind) -> "RegisterLabel":
        return RegisterLabel(self.kind, self.id, basis)

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.id}"


def atom_register(kind: RegisterKind, id: str) -> RegisterLabel:
    if kind is RegisterKind.PHOTON:
        raise QStateError("atom register cannot have PHOTON kind")
    return RegisterLabel(kind, id, BasisKind.ATOM)


def photon_register(id: str, basis: BasisKind = BasisKind.TIME_BIN) -> RegisterLabel:
    if basis is BasisKind.ATOM:
        raise QStateError("photon register cannot use the atomic basis")
    return RegisterLabel(RegisterKind.PHOTON, id, basis)


def mats_close(a: np.ndarray, b: np.ndarray, eps: float = EPS_MAT) -> bool:
    """Entrywise equality of two matrices up to absolute tolerance ``eps``."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a.shape == b.shape and bool(np.max(np.abs(a - b), initial=0.0) <= eps)


def _as_complex(m: np.ndarray) -> np.ndarray:
    arr = np.array(m, dtype=complex)
    if arr.ndim != 2:
        raise QStateError(f"expected a matrix, got ndim={arr.ndim}")
    return arr


def check_hermitian(m: np.ndarray, eps: float = EPS_MAT) -> None:
    if not mats_close(m, m.conj().T, eps):
        raise QStateError("matrix is not Hermitian within tolerance")


def check_psd(m: np.ndarray, eps: float = EPS_PSD) -> None:
    evals = np.linalg.eigvalsh(m)
    if evals.size and evals[0] < -eps:
        raise QStateError(f"matrix has negative eigenvalue {evals[0]:.3e}")


@dataclass(frozen=True)
class JointState:
    """Unnormalized density matrix over an ordered list of 3-level registers.

    ``Tr(rho)`` is the probability of this branch and lies in [0, 1].
    """

    registers: tuple[RegisterLabel, ...]
    rho: np.ndarray

    def __post_init__(self) -> None:
        registers = tuple(self.registers)
        if len(set(registers)) != len(registers):
            raise QStateError("duplicate register label in JointState")
        rho = _as_complex(self.rho)
        dim = LEVELS ** len(registers)
        if rho.shape != (dim, dim):
            raise QStateError(
                f"rho has shape {rho.shape}, expected {(dim, dim)} "
                f"for {len(registers)} registers"
            )
        check_hermitian(rho)
        check_psd(rho)
        tr = float(np.real(np.trace(rho)))
        if not -EPS_MAT <= tr <= 1.0 + EPS_MAT:
            raise QStateError(f"trace {tr} outside [0, 1]")
        rho = rho.copy()
        rho.setflags(write=False)
        object.__setattr__(self, "registers", registers)
        object.__setattr__(self, "rho", rho)

    @property
    def num_registers(self) -> int:
        return len(self.registers)

    @property
    def dim(self) -> int:
        return LEVELS**self.num_registers

    def index(self, label: RegisterLabel) -> int:
        try:
            return self.registers.index(label)
        except ValueError:
            raise QStateError(f"unknown register {label}") from None

    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)))

    def normalized(self) -> "JointState":
        tr = self.trace()
        if tr <= EPS_MAT:
            raise QStateError("cannot normalize a zero-trace state")
        return JointState(self.registers, self.rho / tr)


def pure_state(register: RegisterLabel, amplitudes: Sequence[complex]) -> JointState:
    """Single-register pure state from a 3-vector of amplitudes."""
    vec = np.asarray(amplitudes, dtype=complex)
    if vec.shape != (LEVELS,):
        raise QStateError("amplitude vector must have length 3")
    return JointState((register,), np.outer(vec, vec.conj()))


@dataclass(frozen=True)
class KrausChannel:
    """Trace-non-increasing map given by Kraus operators on 1 or 2 registers."""

    operators: tuple[np.ndarray, ...]
    arity: int

    def __post_init__(self) -> None:
        if self.arity not in (1, 2):
            raise QStateError("channel arity must be 1 or 2")
        dim = LEVELS**self.arity
        ops = []
        total = np.zeros((dim, dim), dtype=complex)
        for op in self.operators:
            op = _as_complex(op)
            if op.shape != (dim, dim):
                raise QStateError(
                    f"Kraus operator shape {op.shape} does not match arity {self.arity}"
                )
            op = op.copy()
            op.setflags(write=False)
            ops.append(op)
            total += op.conj().T @ op
        if not ops:
            raise QStateError("channel needs at least one Kraus operator")
        max_eig = float(np.linalg.eigvalsh(total)[-1])
        if max_eig > 1.0 + EPS_PSD:
            raise QStateError(
                f"channel is trace-increasing (max eigenvalue {max_eig:.6g})"
            )
        object.__setattr__(self, "operators", tuple(ops))

    @property
    def trace_preserving(self) -> bool:
        dim = LEVELS**self.arity
        total = sum(op.conj().T @ op for op in self.operators)
        return mats_close(total, np.eye(dim))


# ---------------------------------------------------------------------------
# operator embedding


def _embed(op: np.ndarray, n: int, positions: Sequence[int]) -> np.ndarray:
    """Lift ``op`` acting on ``positions`` (in that order) to the full space."""
    k = len(positions)
    rest = [i for i in range(n) if i not in positions]
    full = np.kron(op, np.eye(LEVELS ** (n - k), dtype=complex))
    if n == k and list(positions) == list(range(n)):
        return full
    order = list(positions) + rest  # slot j of `full` is register order[j]
    inv = np.argsort(order)
    tensor = full.reshape((LEVELS,) * (2 * n))
    perm = list(inv) + [n + i for i in inv]
    return tensor.transpose(perm).reshape(LEVELS**n, LEVELS**n)


def embedded_operator(
    op: np.ndarray, state: JointState, targets: Sequence[RegisterLabel]
) -> np.ndarray:
    positions = [state.index(t) for t in targets]
    if len(set(positions)) != len(positions):
        raise QStateError("duplicate target register")
    return _embed(_as_complex(op), state.num_registers, positions)


# ---------------------------------------------------------------------------
# operations


def tensor(a: JointState, b: JointState) -> JointState:
    """Tensor product; traces multiply, registers concatenate."""
    overlap = set(a.registers) & set(b.registers)
    if overlap:
        raise QStateError(f"duplicate register label(s): {sorted(map(str, overlap))}")
    return JointState(a.registers + b.registers, np.kron(a.rho, b.rho))


def apply_channel(
    s: JointState, ch: KrausChannel, targets: Sequence[RegisterLabel] | RegisterLabel
) -> JointState:
    """Apply ``sum_k K rho K^dag`` with the channel lifted onto ``targets``."""
    if isinstance(targets, RegisterLabel):
        targets = (targets,)
    if len(targets) != ch.arity:
        raise QStateError(
            f"channel arity {ch.arity} does not match {len(targets)} target(s)"
        )
    rho = np.zeros_like(s.rho)
    for op in ch.operators:
        full = embedded_operator(op, s, targets)
        rho = rho + full @ s.rho @ full.conj().T
    return JointState(s.registers, rho)


def project(
    s: JointState, projector: np.ndarray, target: RegisterLabel
) -> tuple[float, JointState]:
    """Project one register; returns the absolute branch probability.

    The returned state is unnormalized (its trace equals the probability).
    """
    p = _as_complex(projector)
    check_hermitian(p)
    if not mats_close(p @ p, p):
        raise QStateError("projector is not idempotent within tolerance")
    full = embedded_operator(p, s, (target,))
    rho = full @ s.rho @ full.conj().T
    prob = float(np.real(np.trace(rho)))
    prob = min(max(prob, 0.0), 1.0)
    return prob, JointState(s.registers, rho)


def partial_trace(s: JointState, discard: RegisterLabel) -> JointState:
    """Trace out one register; remaining registers keep their order."""
    pos = s.index(discard)
    n = s.num_registers
    tensor_rho = s.rho.reshape((LEVELS,) * (2 * n))
    reduced = np.trace(tensor_rho, axis1=pos, axis2=n + pos)
    registers = s.registers[:pos] + s.registers[pos + 1 :]
    dim = LEVELS ** (n - 1)
    return JointState(registers, reduced.reshape(dim, dim))


# Pauli operators on the qubit sector (levels 0, 1); absence level maps to 0.
PAULI_OPS: dict[str, np.ndarray] = {
    "I": np.diag([1.0, 1.0, 0.0]).astype(complex),
    "X": np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=complex),
    "Y": np.array([[0, -1j, 0], [1j, 0, 0], [0, 0, 0]], dtype=complex),
    "Z": np.diag([1.0, -1.0, 0.0]).astype(complex),
}

#: Projector onto the qubit (non-absence) sector of one register.
QUBIT_SECTOR = np.diag([1.0, 1.0, 0.0]).astype(complex)


def pauli_expectation(
    s: JointState,
    ops: Mapping[RegisterLabel, str],
    renormalize: bool = False,
) -> float:
    """Expectation of a product of qubit-sector Pauli operators.

    The state must be normalized over the non-vacuum sector of the measured
    registers; pass ``renormalize=True`` to have that projection and
    renormalization applied here, otherwise a unit-trace state is required.
    """
    if not ops:
        raise QStateError("no operators given")
    sector = np.eye(1, dtype=complex)
    for reg in s.registers:
        block = QUBIT_SECTOR if reg in ops else np.eye(LEVELS, dtype=complex)
        sector = np.kron(sector, block)
    projected = sector @ s.rho @ sector
    sector_trace = float(np.real(np.trace(projected)))
    if renormalize:
        if sector_trace <= EPS_MAT:
            raise QStateError("no weight in the qubit sector to renormalize")
        rho = projected / sector_trace
    else:
        if abs(sector_trace - 1.0) > 1e-6:
            raise QStateError(
                "state is not normalized over the non-vacuum sector of the "
                "measured registers (pass renormalize=True)"
            )
        rho = s.rho

    observable = np.eye(1, dtype=complex)
    for reg in s.registers:
        if reg in ops:
            name = ops[reg]
            if name not in PAULI_OPS:
                raise QStateError(f"unknown Pauli label {name!r}")
            block = PAULI_OPS[name]
        else:
            block = np.eye(LEVELS, dtype=complex)
        observable = np.kron(observable, block)
    value = complex(np.trace(rho @ observable))
    if abs(value.imag) > 1e-9:
        raise QStateError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def state_fidelity(rho: JointState, psi: np.ndarray) -> float:
    """Overlap ``<psi| rho |psi>`` of a normalized state with a pure target."""
    if abs(rho.trace() - 1.0) > 1e-6:
        raise QStateError("state must be normalized for fidelity")
    vec = np.asarray(psi, dtype=complex).reshape(-1)
    if vec.shape != (rho.dim,):
        raise QStateError(f"pure state has dimension {vec.size}, expected {rho.dim}")
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > 1e-6:
        raise QStateError("target state must be unit norm")
    val = float(np.real(vec.conj() @ rho.rho @ vec))
    return min(max(val, 0.0), 1.0)


def trace_norm(m: np.ndarray) -> float:
    """Sum of singular values of a square matrix."""
    arr = _as_complex(m)
    if arr.shape[0] != arr.shape[1]:
        raise QStateError("trace norm requires a square matrix")
    return float(np.sum(np.linalg.svd(arr, compute_uv=False)))
