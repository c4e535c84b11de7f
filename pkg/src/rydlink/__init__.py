"""Simulator and analysis toolkit for a heralded-storage quantum link
between two Rydberg-superatom memory nodes."""

from .qstate import (
    BasisKind,
    JointState,
    KrausChannel,
    QStateError,
    RegisterKind,
    RegisterLabel,
    apply_channel,
    partial_trace,
    pauli_expectation,
    project,
    pure_state,
    state_fidelity,
    tensor,
    trace_norm,
)
from .photonics import (
    InputStateId,
    MeasurementSetting,
    basis_projectors,
    make_input_state,
    setting_unitary,
    timebin_to_polarization,
    transmission_loss_channel,
)
from .superatom import (
    NodeParams,
    Timeline,
    eit_store,
    excite_level,
    excite_superposition,
    motional_dephasing,
    read_and_patch,
    readout,
)
from .detection import (
    CoincidenceTable,
    DetectionRecord,
    DetectorParams,
    click_probabilities,
    coincidence_tally,
    deduct_dark_counts,
    fit_visibility,
    herald_efficiency,
    sample_shots,
)
from .tomography import (
    ProcessMatrix,
    TomoDataset,
    classical_limit_check,
    entanglement_fidelity_pauli,
    entanglement_fidelity_vis,
    identity_process,
    process_fidelity,
    reconstruct_process,
    reconstruct_state,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
