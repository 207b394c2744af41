"""Simulator for dual-rail atomic-ensemble qubits: photodetection Bell
measurements, a GHZ-teleported C-NOT and two-qubit Deutsch-Jozsa."""

from .bell import (
    BellOutcome,
    ClickRecord,
    DetectorModel,
    MeasurementConfig,
    Verdict,
    acceptance_probability,
    classify_clicks,
    ideal_bell_measure,
    ideal_bell_project,
    physical_bell_protocol,
)
from .dj import DJBackend, DJVerdict, OracleId, oracle_unitary, run_dj, verify_oracle_equivalence
from .fock import FockState, ModeRegister, fidelity, inner_product, vacuum_state
from .harness import ExperimentSpec, TrialStats, emit, run_sweep, run_trials
from .teleport import MeasurementBackend, matrix_cnot_reference, prepare_chi, project_teleported_cnot, teleported_cnot

__version__ = "0.1.0"

__all__ = [
    "BellOutcome", "ClickRecord", "DetectorModel", "MeasurementConfig", "Verdict",
    "acceptance_probability", "classify_clicks", "ideal_bell_measure", "ideal_bell_project",
    "physical_bell_protocol",
    "DJBackend", "DJVerdict", "OracleId", "oracle_unitary", "run_dj", "verify_oracle_equivalence",
    "FockState", "ModeRegister", "fidelity", "inner_product", "vacuum_state",
    "ExperimentSpec", "TrialStats", "emit", "run_sweep", "run_trials",
    "MeasurementBackend", "matrix_cnot_reference", "prepare_chi", "project_teleported_cnot", "teleported_cnot",
]
