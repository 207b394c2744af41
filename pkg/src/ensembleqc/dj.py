"""Two-qubit Deutsch-Jozsa on atomic ensembles 9 (query) and 10 (auxiliary).

Oracles come in two forms: the direct |x, y> -> |x, y + f(x)> unitary, and
the Raman-rotation / C-NOT sequences the hardware would run. C-NOTs are either
applied directly to the dual-rail subspace or teleported through freshly
allocated GHZ resources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .bell import DetectorModel
from .fock import FockState, ModeRegister, project_occupation, split_by_occupation, vacuum_state
from .qubits import (
    LogicalQubitView,
    add_ensembles,
    anti_pump,
    apply_logical_gate,
    hadamard,
    logical_view,
    pi_swap,
    prepare_logical,
    r_minus,
    r_plus,
    raman_rotation,
)
from .teleport import (
    CNOT_MATRIX,
    MeasurementBackend,
    TeleportationLog,
    prepare_chi,
    prepare_ghz,
    teleported_cnot,
)

QUERY = 9
AUX = 10


class OracleId(str, Enum):
    F1 = "F1"
    F2 = "F2"
    F3 = "F3"
    F4 = "F4"

    @property
    def table(self) -> tuple[int, int]:
        """(f(0), f(1))."""
        return {"F1": (0, 0), "F2": (1, 1), "F3": (0, 1), "F4": (1, 0)}[self.value]

    @property
    def is_constant(self) -> bool:
        f0, f1 = self.table
        return f0 == f1


class DJVerdict(str, Enum):
    CONSTANT = "Constant"
    BALANCED = "Balanced"


class OracleForm(str, Enum):
    DIRECT = "direct"
    DECOMPOSED = "decomposed"


class CnotKind(str, Enum):
    DIRECT = "direct"
    TELEPORTED = "teleported"


def oracle_unitary(oracle: OracleId) -> np.ndarray:
    """|x, y> -> |x, y xor f(x)> with basis index 2x + y."""
    u = np.zeros((4, 4))
    for x in (0, 1):
        for y in (0, 1):
            u[2 * x + (y ^ oracle.table[x]), 2 * x + y] = 1.0
    return u


# Gate sequences in application order; "cnot" has the query as control.
DECOMPOSITIONS: dict[OracleId, tuple] = {
    OracleId.F1: (),
    OracleId.F2: ("cnot", r_plus(), "cnot", r_minus()),
    OracleId.F3: ("cnot",),
    OracleId.F4: (r_plus(), "cnot", r_minus()),
}


@dataclass(frozen=True)
class OracleEquivalence:
    equal: bool
    phase: complex
    deviation: float


def decomposition_matrix(oracle: OracleId) -> np.ndarray:
    m = np.eye(4, dtype=complex)
    for step in DECOMPOSITIONS[oracle]:
        g = CNOT_MATRIX if isinstance(step, str) else np.kron(step, np.eye(2))
        m = g @ m
    return m


def verify_oracle_equivalence(oracle: OracleId, atol: float = 1e-12) -> OracleEquivalence:
    """Compare the gate sequence with the direct oracle up to a global phase."""
    m = decomposition_matrix(oracle)
    u = oracle_unitary(oracle)
    phase = np.trace(u.conj().T @ m) / 4
    phase = phase / abs(phase) if abs(phase) > 0 else 1.0
    deviation = float(np.max(np.abs(m - phase * u)))
    return OracleEquivalence(deviation <= atol, complex(phase), deviation)


@dataclass(frozen=True)
class DJBackend:
    oracle_form: OracleForm = OracleForm.DECOMPOSED
    cnot: CnotKind = CnotKind.DIRECT
    measurement: MeasurementBackend = MeasurementBackend()
    physical_readout: bool = False


@dataclass
class WorkingState:
    """The register plus where the query and auxiliary qubits currently live."""

    state: FockState
    query: int = QUERY
    aux: int = AUX
    log: TeleportationLog = field(default_factory=TeleportationLog)


def prepare_dj_input(state: FockState, e9: int = QUERY, e10: int = AUX) -> FockState:
    """(h9 + v9)(h10 - v10)|vac>/2: both start in h, then one Raman pulse each."""
    state = prepare_logical(state, e9, 1.0, 0.0)
    state = prepare_logical(state, e10, 1.0, 0.0)
    state = raman_rotation(state, e9, hadamard())
    # H after a bit flip sends h to (h - v)/sqrt2
    return raman_rotation(state, e10, hadamard() @ np.array([[0.0, 1.0], [1.0, 0.0]]))


def _fresh_ensembles(register: ModeRegister, count: int) -> list[int]:
    taken = set(register.ensembles) | set(register.retired)
    ids, k = [], 1
    while len(ids) < count:
        if k not in taken:
            ids.append(k)
        k += 1
    return ids


def apply_cnot(work: WorkingState, backend: DJBackend, rng: np.random.Generator) -> WorkingState:
    """C-NOT with the query as control; teleported C-NOTs move both wires."""
    if backend.cnot is CnotKind.DIRECT:
        work.state = apply_logical_gate(work.state, [work.query, work.aux], CNOT_MATRIX)
        return work
    ids = _fresh_ensembles(work.state.register, 6)
    state = add_ensembles(work.state, ids)
    state = prepare_ghz(prepare_ghz(state, *ids[:3]), *ids[3:])
    state, log = prepare_chi(state, ids, backend.measurement, rng)
    work.log.extend(log)
    if not log.accepted:
        return work
    resource = (ids[0], ids[1], ids[4], ids[5])
    result = teleported_cnot(state, work.query, work.aux, resource, backend.measurement, rng)
    work.log.extend(result.log)
    if result.log.accepted:
        work.state, work.query, work.aux = result.state, result.control_out, result.target_out
    return work


def apply_oracle_decomposed(
    work: WorkingState, oracle: OracleId, backend: DJBackend, rng: np.random.Generator
) -> WorkingState:
    """Run the rotation/C-NOT sequence of ``oracle`` on the working qubits."""
    for step in DECOMPOSITIONS[oracle]:
        if isinstance(step, str):
            work = apply_cnot(work, backend, rng)
            if not work.log.accepted:
                return work
        else:
            work.state = raman_rotation(work.state, work.query, step)
    return work


def apply_oracle(work: WorkingState, oracle: OracleId, backend: DJBackend, rng: np.random.Generator) -> WorkingState:
    if backend.oracle_form is OracleForm.DIRECT:
        work.state = apply_logical_gate(work.state, [work.query, work.aux], oracle_unitary(oracle))
        return work
    return apply_oracle_decomposed(work, oracle, backend, rng)


def _detect(photons: int, detectors: DetectorModel, rng: np.random.Generator) -> int:
    detected = int(rng.binomial(photons, detectors.efficiency)) if photons else 0
    count = detected + int(rng.random() < detectors.dark_count_prob)
    return count if detectors.number_resolving else min(count, 1)


def physical_readout(
    state: FockState, e: int, detectors: DetectorModel, rng: np.random.Generator
) -> tuple[int, int]:
    """Clicks for the h round then the (pi-swapped) v round of ensemble ``e``."""
    clicks = []
    for rnd in range(2):
        if rnd == 1:
            state = raman_rotation(state, e, pi_swap())
        state, photon = anti_pump(state, e)
        branches = split_by_occupation(state, [photon])
        u, acc = rng.random(), 0.0
        chosen = branches[-1]
        for br in branches:
            acc += br[1]
            if u < acc:
                chosen = br
                break
        (n,), _, state = chosen
        clicks.append(_detect(n, detectors, rng))
    return clicks[0], clicks[1]


@dataclass
class DJResult:
    verdict: DJVerdict | None
    query_state: LogicalQubitView | None
    log: TeleportationLog
    clicks: tuple[int, int] | None = None

    @property
    def accepted(self) -> bool:
        return self.verdict is not None


def run_dj(
    oracle: OracleId,
    backend: DJBackend = DJBackend(),
    detectors: DetectorModel = DetectorModel(),
    rng: np.random.Generator | None = None,
) -> DJResult:
    """Prepare, query the oracle once, Hadamard the query, read it out.

    ``detectors`` governs the physical readout; Bell measurements inside
    teleported C-NOTs use the backend's own detector model. Discarded runs
    (lost readout photon, uncertified teleportation) return ``verdict=None``.
    """
    if rng is None:
        rng = np.random.default_rng()
    state = prepare_dj_input(vacuum_state(ModeRegister.for_ensembles([QUERY, AUX])))
    work = apply_oracle(WorkingState(state), oracle, backend, rng)
    if not work.log.accepted:
        return DJResult(None, None, work.log)
    state = raman_rotation(work.state, work.query, hadamard())
    view = logical_view(state, work.query)
    h, _ = state.register.ensemble_modes(work.query)
    if not backend.physical_readout:
        p_h, _ = project_occupation(state, h, 1)
        verdict = DJVerdict.CONSTANT if rng.random() < p_h else DJVerdict.BALANCED
        return DJResult(verdict, view, work.log)
    clicks = physical_readout(state, work.query, detectors, rng)
    if clicks == (1, 0):
        verdict = DJVerdict.CONSTANT
    elif clicks == (0, 1):
        verdict = DJVerdict.BALANCED
    else:
        verdict = None
    return DJResult(verdict, view, work.log, clicks)


def expected_verdict(oracle: OracleId) -> DJVerdict:
    return DJVerdict.CONSTANT if oracle.is_constant else DJVerdict.BALANCED


def phase_pattern(oracle: OracleId) -> np.ndarray:
    """((-1)^f(0), (-1)^f(1))/sqrt2: the query qubit after the oracle."""
    f0, f1 = oracle.table
    return np.array([(-1) ** f0, (-1) ** f1]) / math.sqrt(2.0)
