"""Time-bin qubit states, the time-bin to polarization map, and measurement
settings with their projector families."""

from __future__ import annotations

from enum import Enum

import numpy as np

from .qstate import (
    BasisKind,
    JointState,
    KrausChannel,
    LEVELS,
    QStateError,
    RegisterLabel,
    embedded_operator,
    photon_register,
    pure_state,
)

_SQ2 = 1.0 / np.sqrt(2.0)


class InputStateId(Enum):
    """The six benchmark photon states.

    E/L are the early/late bins, D/A their equal superpositions with phase
    0/pi, and R/LC the circular pair with phase +-pi/2.  LC names the
    left-circular analog to avoid colliding with the late bin L.
    """

    E = "E"
    L = "L"
    D = "D"
    A = "A"
    R = "R"
    LC = "LC"


_INPUT_AMPLITUDES: dict[InputStateId, tuple[complex, complex]] = {
    InputStateId.E: (1.0, 0.0),
    InputStateId.L: (0.0, 1.0),
    InputStateId.D: (_SQ2, _SQ2),
    InputStateId.A: (_SQ2, -_SQ2),
    InputStateId.R: (_SQ2, 1j * _SQ2),
    InputStateId.LC: (_SQ2, -1j * _SQ2),
}


def input_amplitudes(state_id: InputStateId) -> np.ndarray:
    """Qubit-sector amplitudes (early, late) of a benchmark state."""
    a, b = _INPUT_AMPLITUDES[state_id]
    return np.array([a, b], dtype=complex)


def make_input_state(
    state_id: InputStateId, register: RegisterLabel | None = None
) -> JointState:
    """Unit-trace pure photon state with zero vacuum amplitude."""
    if register is None:
        register = photon_register("input")
    a, b = _INPUT_AMPLITUDES[state_id]
    return pure_state(register, (a, b, 0.0))


def timebin_to_polarization(
    s: JointState, photon: RegisterLabel, theta0: float
) -> JointState:
    """Interferometer map |tE> -> |V>, |tL> -> e^{i theta0} |H>.

    Lossless and unitary on the qubit sector; the physical arm transmission
    is a separately configured loss channel.  The register's basis semantics
    switch to polarization.
    """
    pos = s.index(photon)
    if photon.basis is not BasisKind.TIME_BIN:
        raise QStateError(f"register {photon} does not carry a time-bin qubit")
    unitary = np.diag([1.0, np.exp(1j * theta0), 1.0]).astype(complex)
    full = embedded_operator(unitary, s, (photon,))
    rho = full @ s.rho @ full.conj().T
    new_label = photon.with_basis(BasisKind.POLARIZATION)
    registers = list(s.registers)
    registers[pos] = new_label
    return JointState(tuple(registers), rho)


class MeasurementSetting(Enum):
    """Rotation applied before the fixed (V, H) detection basis.

    The three settings are tomographically complete for one qubit.
    """

    Z = "identity"
    X = "ry_minus_half_pi"
    Y = "rx_half_pi"

    @property
    def basis_label(self) -> str:
        return self.name


def _qubit_rotation(axis: str, theta: float) -> np.ndarray:
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    if axis == "y":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if axis == "x":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    raise ValueError(axis)


def setting_unitary(setting: MeasurementSetting) -> np.ndarray:
    """3x3 rotation of the setting; identity on the vacuum level."""
    if setting is MeasurementSetting.Z:
        qubit = np.eye(2, dtype=complex)
    elif setting is MeasurementSetting.X:
        qubit = _qubit_rotation("y", -np.pi / 2.0)
    else:
        qubit = _qubit_rotation("x", np.pi / 2.0)
    out = np.eye(LEVELS, dtype=complex)
    out[:2, :2] = qubit
    return out


def basis_projectors(
    setting: MeasurementSetting,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orthogonal projectors (P_plus, P_minus, P_vac) summing to identity.

    P_plus / P_minus are the detection-basis projectors rotated by the
    setting unitary: outcome probabilities are those of measuring after the
    rotation in the fixed (V, H) basis.
    """
    u = setting_unitary(setting)
    p_plus = u.conj().T @ np.diag([1.0, 0.0, 0.0]).astype(complex) @ u
    p_minus = u.conj().T @ np.diag([0.0, 1.0, 0.0]).astype(complex) @ u
    p_vac = np.diag([0.0, 0.0, 1.0]).astype(complex)
    return p_plus, p_minus, p_vac


def transmission_loss_channel(eta: float) -> KrausChannel:
    """Photon survives with probability ``eta``, else decays to vacuum.

    Loss marks which-path information, so the two bin-loss branches are
    separate Kraus operators; the pass branch keeps vacuum coherence.
    """
    if not 0.0 <= eta <= 1.0:
        raise QStateError(f"transmission eta={eta} outside [0, 1]")
    root_eta = np.sqrt(eta)
    root_loss = np.sqrt(1.0 - eta)
    k_pass = np.diag([root_eta, root_eta, 1.0]).astype(complex)
    k_loss_early = np.zeros((3, 3), dtype=complex)
    k_loss_early[2, 0] = root_loss
    k_loss_late = np.zeros((3, 3), dtype=complex)
    k_loss_late[2, 1] = root_loss
    return KrausChannel((k_pass, k_loss_early, k_loss_late), arity=1)
