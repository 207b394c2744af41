"""Oracle-agreement checks run by ``--self-check`` before an experiment."""

from __future__ import annotations

from .bell import (
    BellOutcome,
    ClickRecord,
    MeasurementConfig,
    bell_state,
    certified_outcome,
    classify_clicks,
    ideal_bell_project,
    protocol_branches,
)
from .dj import OracleId, verify_oracle_equivalence
from .fock import ModeRegister
from .teleport import CHI_CORRECTIONS, CNOT_CORRECTIONS, PauliOp, search_chi_corrections, search_cnot_corrections


def _strip(frame):
    return tuple(c for c in frame if c.op is not PauliOp.IDENTITY)


def bell_agreement_failures() -> list[str]:
    """Every photon branch of every Bell input must certify the right outcome."""
    failures = []
    register = ModeRegister.for_ensembles([1, 2])
    for expected in BellOutcome:
        state = bell_state(register, 1, 2, expected)
        for config in MeasurementConfig:
            for branch in protocol_branches(state, 1, 2, config):
                verdict = classify_clicks(ClickRecord(branch.photons), config)
                outcome = certified_outcome(verdict, config)
                if outcome is None:
                    continue
                if ideal_bell_project(state, 1, 2, outcome).prob < 1 - 1e-12:
                    failures.append(f"{expected.value}/{config.value}: branch {branch.photons} certified {outcome.value}")
    return failures


def correction_table_failures() -> list[str]:
    failures = []
    for outcome, frames in search_chi_corrections().items():
        if not frames or _strip(frames[0]) != CHI_CORRECTIONS[outcome]:
            failures.append(f"chi correction for {outcome.value} disagrees with search")
    for pair, frames in search_cnot_corrections().items():
        if len(frames) != 1 or _strip(frames[0]) != CNOT_CORRECTIONS[pair]:
            failures.append(f"cnot correction for {pair[0].value},{pair[1].value} disagrees with search")
    return failures


def oracle_failures() -> list[str]:
    return [f"{o.value} decomposition differs from its unitary" for o in OracleId if not verify_oracle_equivalence(o).equal]


def run_self_check() -> list[str]:
    return bell_agreement_failures() + correction_table_failures() + oracle_failures()
