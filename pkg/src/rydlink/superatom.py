"""Node-level physics: collective-excitation preparation, EIT storage,
readout, the read-and-patch heralding map, and storage-time dephasing.

Every map is expressed through Kraus channels on one or two registers, so the
qstate invariants (Hermiticity, positivity, trace bookkeeping) hold by
construction.  Emission and storage are coherent isometries on their success
branch; loss branches are incoherent because the environment records which
bin was lost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qstate import (
    BasisKind,
    JointState,
    KrausChannel,
    LEVELS,
    QStateError,
    RegisterLabel,
    apply_channel,
    partial_trace,
    photon_register,
    pure_state,
    tensor,
)

_GROUND = 2  # atomic ground level index
_VACUUM = 2  # photonic vacuum level index


@dataclass(frozen=True)
class NodeParams:
    """Efficiencies and noise figures of one superatom node.

    ``excitation_error`` is the depolarizing weight mixed into every
    preparation; ``read_phase`` is the phase of the read pulses, swept in the
    fringe experiments.  ``dephasing_model`` selects the coherence decay
    shape ("gaussian" is the thermal-motion default).
    """

    eta_store: float = 1.0
    eta_retrieve: float = 1.0
    dephasing_lifetime: float = 1.4e-6
    excitation_error: float = 0.0
    read_phase: float = 0.0
    dephasing_model: str = "gaussian"

    def __post_init__(self) -> None:
        for name in ("eta_store", "eta_retrieve", "excitation_error"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise QStateError(f"{name}={value} outside [0, 1]")
        if self.dephasing_lifetime <= 0.0:
            raise QStateError("dephasing_lifetime must be positive")
        if self.dephasing_model not in ("gaussian", "exponential"):
            raise QStateError(f"unknown dephasing model {self.dephasing_model!r}")


@dataclass(frozen=True)
class Timeline:
    """Protocol step durations in seconds.

    ``storage_hold`` covers store-to-patch at the memory node; the two extra
    waits cover patch-to-retrieval there and the emitting node's idle time in
    the two-node protocol.
    """

    bin_separation: float = 425e-9
    storage_hold: float = 670e-9
    patch_to_retrieval: float = 0.0
    remote_idle: float = 0.0

    def __post_init__(self) -> None:
        for name in ("bin_separation", "storage_hold", "patch_to_retrieval", "remote_idle"):
            if getattr(self, name) < 0.0:
                raise QStateError(f"{name} must be >= 0")


# ---------------------------------------------------------------------------
# qubit-sector Pauli mixtures (vacuum/ground level untouched)

_ID3 = np.eye(LEVELS, dtype=complex)
_X3 = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]], dtype=complex)
_Y3 = np.array([[0, -1j, 0], [1j, 0, 0], [0, 0, 1]], dtype=complex)
_Z3 = np.diag([1.0, -1.0, 1.0]).astype(complex)


def qubit_depolarizing_channel(weight: float) -> KrausChannel:
    """Mix ``weight`` of the maximally mixed qubit into the qubit sector."""
    if not 0.0 <= weight <= 1.0:
        raise QStateError(f"depolarizing weight {weight} outside [0, 1]")
    w = weight / 4.0
    ops = (
        np.sqrt(1.0 - 3.0 * w) * _ID3,
        np.sqrt(w) * _X3,
        np.sqrt(w) * _Y3,
        np.sqrt(w) * _Z3,
    )
    return KrausChannel(ops, arity=1)


def bin_crosstalk_channel(probability: float) -> KrausChannel:
    """Early/late mode cross-talk on an emitted photon.

    With the given probability the qubit suffers a flip about a random
    equatorial axis (X or Y with equal weight), which degrades bin
    populations twice as fast as it degrades either coherence quadrature.
    """
    if not 0.0 <= probability <= 1.0:
        raise QStateError(f"crosstalk probability {probability} outside [0, 1]")
    ops = (
        np.sqrt(1.0 - probability) * _ID3,
        np.sqrt(probability / 2.0) * _X3,
        np.sqrt(probability / 2.0) * _Y3,
    )
    return KrausChannel(ops, arity=1)


# ---------------------------------------------------------------------------
# preparation


def _prepared_state(
    node: RegisterLabel, amplitudes: np.ndarray, params: NodeParams
) -> JointState:
    state = pure_state(node, (amplitudes[0], amplitudes[1], 0.0))
    if params.excitation_error > 0.0:
        state = apply_channel(
            state, qubit_depolarizing_channel(params.excitation_error), node
        )
    return state

def excite_superposition(
    node: RegisterLabel, phase: float, params: NodeParams
) -> JointState:
    """Collective excitation (|R1> + e^{i phase}|R2>)/sqrt(2).

    Preparation is deterministic at this abstraction (trace 1); blockade
    leakage and pulse imperfections enter as the depolarizing
    ``excitation_error`` weight.
    """
    if node.basis is not BasisKind.ATOM:
        raise QStateError(f"register {node} is not an atom")
    amps = np.array([1.0, np.exp(1j * phase)], dtype=complex) / np.sqrt(2.0)
    return _prepared_state(node, amps, params)


def excite_level(node: RegisterLabel, level: int, params: NodeParams) -> JointState:
    """Single pi-pulse preparation of |R1> (level 0) or |R2> (level 1)."""
    if node.basis is not BasisKind.ATOM:
        raise QStateError(f"register {node} is not an atom")
    if level not in (0, 1):
        raise QStateError("level must be 0 (R1) or 1 (R2)")
    amps = np.zeros(2, dtype=complex)
    amps[level] = 1.0
    return _prepared_state(node, amps, params)


# ---------------------------------------------------------------------------
# emission / storage maps


def _ket(i: int, j: int) -> np.ndarray:
    vec = np.zeros(LEVELS * LEVELS, dtype=complex)
    vec[LEVELS * i + j] = 1.0
    return vec


def _pair_op(entries: list[tuple[int, int, int, int, complex]]) -> np.ndarray:
    """Sparse constructor: entries are (out_a, out_b, in_a, in_b, amp)."""
    op = np.zeros((LEVELS * LEVELS, LEVELS * LEVELS), dtype=complex)
    for out_a, out_b, in_a, in_b, amp in entries:
        op += amp * np.outer(_ket(out_a, out_b), _ket(in_a, in_b).conj())
    return op


def _check_eta(eta: float) -> tuple[float, float]:
    if not 0.0 <= eta <= 1.0:
        raise QStateError(f"efficiency eta={eta} outside [0, 1]")
    return np.sqrt(eta), np.sqrt(1.0 - eta)


def readout(
    s: JointState,
    node: RegisterLabel,
    new_photon: str | RegisterLabel,
    eta: float,
    read_phase: float = 0.0,
) -> JointState:
    """Read the collective excitation out into a fresh time-bin photon.

    Success branch (amplitude sqrt(eta)): |R1> -> |G>|tE>,
    |R2> -> e^{i read_phase}|G>|tL>.  Failure destroys the excitation and
    leaves the photon register in vacuum; the ground state emits nothing.
    The map is trace preserving: loss appears as vacuum weight, not as
    trace decay.
    """
    photon = (
        new_photon
        if isinstance(new_photon, RegisterLabel)
        else photon_register(new_photon)
    )
    if photon in s.registers:
        raise QStateError(f"photon label {photon} already in use")
    root_eta, root_loss = _check_eta(eta)
    phase = np.exp(1j * read_phase)
    k_emit = _pair_op(
        [
            (_GROUND, 0, 0, _VACUUM, root_eta),          # R1 -> G, tE
            (_GROUND, 1, 1, _VACUUM, root_eta * phase),  # R2 -> G, tL
            (_GROUND, _VACUUM, _GROUND, _VACUUM, 1.0),   # G stays dark
        ]
    )
    k_fail_r1 = _pair_op([(_GROUND, _VACUUM, 0, _VACUUM, root_loss)])
    k_fail_r2 = _pair_op([(_GROUND, _VACUUM, 1, _VACUUM, root_loss)])
    channel = KrausChannel((k_emit, k_fail_r1, k_fail_r2), arity=2)
    widened = tensor(s, pure_state(photon, (0.0, 0.0, 1.0)))
    return apply_channel(widened, channel, (node, photon))


def eit_store(
    s: JointState, photon: RegisterLabel, node: RegisterLabel, eta: float
) -> JointState:
    """Map a time-bin photon into the node's collective excitation.

    Success branch (amplitude sqrt(eta)): |tE> -> |R1>, |tL> -> |R2>.
    Failure absorbs the photon without storing it.  The consumed photon
    register is removed from the returned state.  A node register absent
    from the state is tensored in at the ground level first.
    """
    if photon.basis is not BasisKind.TIME_BIN:
        raise QStateError(f"register {photon} does not carry a time-bin qubit")
    if node not in s.registers:
        s = tensor(s, pure_state(node, (0.0, 0.0, 1.0)))
    node_pops = partial_trace_to_register(s, node)
    if float(np.real(node_pops[0, 0] + node_pops[1, 1])) > 1e-9:
        raise QStateError(f"node {node} already holds an excitation")
    root_eta, root_loss = _check_eta(eta)
    k_store = _pair_op(
        [
            (_VACUUM, 0, 0, _GROUND, root_eta),          # tE -> R1
            (_VACUUM, 1, 1, _GROUND, root_eta),          # tL -> R2
            (_VACUUM, _GROUND, _VACUUM, _GROUND, 1.0),   # empty mode, idle atom
        ]
    )
    k_fail_early = _pair_op([(_VACUUM, _GROUND, 0, _GROUND, root_loss)])
    k_fail_late = _pair_op([(_VACUUM, _GROUND, 1, _GROUND, root_loss)])
    channel = KrausChannel((k_store, k_fail_early, k_fail_late), arity=2)
    stored = apply_channel(s, channel, (photon, node))
    return partial_trace(stored, photon)


def read_and_patch(
    s: JointState,
    node: RegisterLabel,
    herald_photon: str | RegisterLabel,
    eta: float,
    read_phase: float = 0.0,
) -> JointState:
    """Emit a herald photon that copies the excitation basis.

    Success branch (amplitude sqrt(eta)): |R1> -> |R1>|tE>,
    |R2> -> e^{i read_phase}|R2>|tL>, so an input alpha|R1> + beta|R2>
    becomes alpha|R1>|tE> + beta e^{i read_phase}|R2>|tL> with the atomic
    qubit preserved.  Failure emits vacuum and destroys the excitation.
    """
    photon = (
        herald_photon
        if isinstance(herald_photon, RegisterLabel)
        else photon_register(herald_photon)
    )
    if photon in s.registers:
        raise QStateError(f"photon label {photon} already in use")
    root_eta, root_loss = _check_eta(eta)
    phase = np.exp(1j * read_phase)
    k_patch = _pair_op(
        [
            (0, 0, 0, _VACUUM, root_eta),                # R1 -> R1, tE
            (1, 1, 1, _VACUUM, root_eta * phase),        # R2 -> R2, tL
            (_GROUND, _VACUUM, _GROUND, _VACUUM, 1.0),
        ]
    )
    k_fail_r1 = _pair_op([(_GROUND, _VACUUM, 0, _VACUUM, root_loss)])
    k_fail_r2 = _pair_op([(_GROUND, _VACUUM, 1, _VACUUM, root_loss)])
    channel = KrausChannel((k_patch, k_fail_r1, k_fail_r2), arity=2)
    widened = tensor(s, pure_state(photon, (0.0, 0.0, 1.0)))
    return apply_channel(widened, channel, (node, photon))


# ---------------------------------------------------------------------------
# dephasing


def coherence_factor(t: float, tau: float, model: str = "gaussian") -> float:
    """Spin-wave coherence surviving a storage time ``t``."""
    if t < 0.0:
        raise QStateError("storage time must be >= 0")
    if tau <= 0.0:
        raise QStateError("lifetime must be positive")
    if model == "gaussian":
        return float(np.exp(-((t / tau) ** 2)))
    if model == "exponential":
        return float(np.exp(-t / tau))
    raise QStateError(f"unknown dephasing model {model!r}")


def dephasing_channel(gamma: float) -> KrausChannel:
    """Random-phase channel scaling the R1/R2 coherence by ``gamma``.

    Modeled as opposite Gaussian phase kicks on the two qubit levels.  The
    qubit coherence shrinks by gamma and populations are untouched; CP-ness
    forces the qubit-to-ground coherences to shrink by gamma^(1/4), which is
    unobservable in the protocols here (those coherences are always zero).
    """
    if not 0.0 <= gamma <= 1.0:
        raise QStateError(f"coherence factor {gamma} outside [0, 1]")
    gamma_quarter = gamma**0.25
    schur = np.array(
        [
            [1.0, gamma, gamma_quarter],
            [gamma, 1.0, gamma_quarter],
            [gamma_quarter, gamma_quarter, 1.0],
        ]
    )
    evals, evecs = np.linalg.eigh(schur)
    ops = []
    for value, vec in zip(evals, evecs.T):
        if value < -1e-12:
            raise QStateError("dephasing Schur matrix not PSD")
        if value > 1e-14:
            ops.append(np.sqrt(value) * np.diag(vec).astype(complex))
    return KrausChannel(tuple(ops), arity=1)


def motional_dephasing(
    s: JointState,
    node: RegisterLabel,
    t: float,
    tau: float,
    model: str = "gaussian",
) -> JointState:
    """Decay of the node's qubit coherence over a storage interval.

    Populations are unchanged and the trace is preserved exactly.
    """
    gamma = coherence_factor(t, tau, model)
    return apply_channel(s, dephasing_channel(gamma), node)


# ---------------------------------------------------------------------------
# small introspection helper


def partial_trace_to_register(s: JointState, keep: RegisterLabel) -> np.ndarray:
    """Reduced 3x3 density matrix of one register."""
    reduced = s
    for reg in s.registers:
        if reg != keep:
            reduced = partial_trace(reduced, reg)
    return np.asarray(reduced.rho)
