"""Bell-basis measurement on two ensembles.

Two backends: an ideal four-outcome projector, and the physical two-round
scheme (anti-pump both ensembles, interfere the photons on a 50/50 splitter,
count clicks at D1/D2, pi-swap, repeat) with lossy, noisy detectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .fock import (
    BEAM_SPLITTER,
    FockState,
    apply_mode_unitary,
    fidelity,
    split_by_occupation,
    vacuum_state,
    zero_state,
)
from .qubits import anti_pump, hadamard, pi_swap, prepare_entangled, raman_rotation

_S = 1 / math.sqrt(2.0)


class BellOutcome(str, Enum):
    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"

    @property
    def vector(self) -> np.ndarray:
        """Amplitudes over (hh, hv, vh, vv) of the two ensembles."""
        return _BELL_VECTORS[self]


_BELL_VECTORS = {
    BellOutcome.PHI_PLUS: np.array([_S, 0, 0, _S]),
    BellOutcome.PHI_MINUS: np.array([_S, 0, 0, -_S]),
    BellOutcome.PSI_PLUS: np.array([0, _S, _S, 0]),
    BellOutcome.PSI_MINUS: np.array([0, _S, -_S, 0]),
}

BELL_STATE_NAMES = {
    "phi+": BellOutcome.PHI_PLUS,
    "phi-": BellOutcome.PHI_MINUS,
    "psi+": BellOutcome.PSI_PLUS,
    "psi-": BellOutcome.PSI_MINUS,
}


class MeasurementConfig(str, Enum):
    """PSI runs the click protocol as is; PHI pre-rotates both ensembles by H."""

    PSI = "psi"
    PHI = "phi"


class Verdict(str, Enum):
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"
    PHI_SUBSPACE = "PhiSubspace"
    DISCARD = "Discard"


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    dark_count_prob: float = 0.0
    number_resolving: bool = False

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if not 0.0 <= self.dark_count_prob < 1.0:
            raise ValueError(f"dark_count_prob must lie in [0, 1), got {self.dark_count_prob}")

    @property
    def is_ideal(self) -> bool:
        return self.efficiency == 1.0 and self.dark_count_prob == 0.0


@dataclass(frozen=True)
class ClickRecord:
    """Per-round (D1, D2) readings; 0/1 unless the detectors resolve number."""

    rounds: tuple[tuple[int, int], tuple[int, int]]

    @classmethod
    def of(cls, round1: Sequence[int], round2: Sequence[int]) -> "ClickRecord":
        return cls((tuple(int(c) for c in round1), tuple(int(c) for c in round2)))


class BellProjection(NamedTuple):
    prob: float
    post: FockState
    failure_mass: float


class BellMeasurement(NamedTuple):
    outcome: BellOutcome | None
    prob: float
    post: FockState


def _pair_indices(state: FockState, a: int, b: int) -> list[int]:
    reg = state.register
    return [reg.index(m) for m in (*reg.ensemble_modes(a), *reg.ensemble_modes(b))]


_LOCAL_INDEX = {(1, 0, 1, 0): 0, (1, 0, 0, 1): 1, (0, 1, 1, 0): 2, (0, 1, 0, 1): 3}


def _bell_components(state: FockState, a: int, b: int):
    """Group amplitudes by the rest of the register.

    Returns ({rest-occupation: 4-vector over hh, hv, vh, vv}, outside weight,
    total weight, pair mode indices).
    """
    idx = _pair_indices(state, a, b)
    rows: dict = {}
    outside = 0.0
    for occ, amp in state.items():
        local = tuple(occ[i] for i in idx)
        k = _LOCAL_INDEX.get(local)
        if k is None:
            outside += abs(amp) ** 2
            continue
        rest = list(occ)
        for i in idx:
            rest[i] = 0
        rows.setdefault(tuple(rest), np.zeros(4, dtype=complex))[k] += amp
    return rows, outside, state.norm_squared(), idx


def _project(rows, total, state: FockState, outcome: BellOutcome) -> tuple[float, FockState]:
    bra = outcome.vector.conj()
    amps = {rest: complex(bra @ vec) for rest, vec in rows.items()}
    post = FockState(state.register, amps, state.lost_weight)
    weight = post.norm_squared()
    if weight == 0.0:
        return 0.0, zero_state(state.register)
    return weight / total, post.normalized()


def ideal_bell_project(state: FockState, a: int, b: int, outcome: BellOutcome) -> BellProjection:
    """Born probability and post state of one Bell projection on ensembles a, b.

    Weight outside the one-excitation-per-ensemble subspace belongs to no
    outcome and is reported as ``failure_mass``. The measured ensembles are
    left in vacuum.
    """
    rows, outside, total, _ = _bell_components(state, a, b)
    if total == 0.0:
        return BellProjection(0.0, zero_state(state.register), 0.0)
    prob, post = _project(rows, total, state, outcome)
    return BellProjection(prob, post, outside / total)


def ideal_bell_measure(state: FockState, a: int, b: int, rng: np.random.Generator) -> BellMeasurement:
    """Sample a Bell outcome by the Born rule.

    Weight outside the single-excitation subspace is a post-selection
    failure; it, or a state with no support at all, yields ``outcome=None``.
    """
    rows, outside, total, _ = _bell_components(state, a, b)
    if total == 0.0 or outside / total >= 1.0 - 1e-15:
        return BellMeasurement(None, 0.0, state)
    results = [(o, *_project(rows, total, state, o)) for o in BellOutcome]
    u = rng.random()
    acc = 0.0
    for outcome, prob, post in results:
        acc += prob
        if u < acc:
            return BellMeasurement(outcome, prob, post)
    return BellMeasurement(None, outside / total, state)


def classify_clicks(clicks: ClickRecord, config: MeasurementConfig = MeasurementConfig.PSI) -> Verdict:
    """Verdict from the two detection rounds.

    The verdict names outcomes in the measured frame; :func:`certified_outcome`
    maps it back through ``config``.
    """
    fired = [tuple(i for i, c in enumerate(r) if c > 0) for r in clicks.rounds]
    single = [len(f) == 1 and sum(r) == 1 for f, r in zip(fired, clicks.rounds)]
    if all(single):
        return Verdict.PSI_PLUS if fired[0] == fired[1] else Verdict.PSI_MINUS
    empty = [len(f) == 0 for f in fired]
    one_detector = [len(f) == 1 for f in fired]
    if (one_detector[0] and empty[1]) or (empty[0] and one_detector[1]):
        return Verdict.PHI_SUBSPACE
    return Verdict.DISCARD


def certified_outcome(verdict: Verdict, config: MeasurementConfig) -> BellOutcome | None:
    """Bell outcome certified by a verdict, or None when nothing is certified.

    Under PHI the H x H pre-rotation maps phi- to psi+ and psi- to -psi-.
    """
    if config is MeasurementConfig.PSI:
        return {Verdict.PSI_PLUS: BellOutcome.PSI_PLUS, Verdict.PSI_MINUS: BellOutcome.PSI_MINUS}.get(verdict)
    return {Verdict.PSI_PLUS: BellOutcome.PHI_MINUS, Verdict.PSI_MINUS: BellOutcome.PSI_MINUS}.get(verdict)


@dataclass(frozen=True)
class PhotonBranch:
    """One photon-number history of the two-round protocol."""

    photons: tuple[tuple[int, int], tuple[int, int]]
    prob: float
    post: FockState


def protocol_branches(
    state: FockState, a: int, b: int, config: MeasurementConfig = MeasurementConfig.PSI
) -> list[PhotonBranch]:
    """Exact enumeration of the photon numbers reaching D1 and D2 in both rounds.

    Each branch carries its Born probability and the normalized state left
    behind once the photons have been absorbed.
    """
    if state.register.cutoff < 2:
        raise ValueError("the physical protocol needs cutoff >= 2")
    current = state.normalized()
    if config is MeasurementConfig.PHI:
        current = raman_rotation(raman_rotation(current, a, hadamard()), b, hadamard())
    branches = [((), 1.0, current)]
    for rnd in range(2):
        nxt = []
        for photons, p, st in branches:
            st, pa = anti_pump(st, a)
            st, pb = anti_pump(st, b)
            st = apply_mode_unitary(st, [pa, pb], BEAM_SPLITTER)
            for counts, q, post in split_by_occupation(st, [pa, pb]):
                if rnd == 0:
                    post = raman_rotation(raman_rotation(post, a, pi_swap()), b, pi_swap())
                nxt.append((photons + (counts,), p * q, post))
        branches = nxt
    return [PhotonBranch(ph, p, post) for ph, p, post in branches]


def sample_detection(photons: tuple[int, int], detectors: DetectorModel, rng: np.random.Generator) -> tuple[int, int]:
    """Readings of D1 and D2 for one round given the photons reaching each."""
    out = []
    for n in photons:
        detected = int(rng.binomial(n, detectors.efficiency)) if n else 0
        dark = int(rng.random() < detectors.dark_count_prob)
        count = detected + dark
        out.append(count if detectors.number_resolving else min(count, 1))
    return out[0], out[1]


@dataclass(frozen=True)
class BellProtocolResult:
    clicks: ClickRecord
    verdict: Verdict
    outcome: BellOutcome | None
    post: FockState
    photons: tuple[tuple[int, int], tuple[int, int]]


def sample_branch(branches: Sequence[PhotonBranch], rng: np.random.Generator) -> PhotonBranch:
    u = rng.random()
    acc = 0.0
    for br in branches:
        acc += br.prob
        if u < acc:
            return br
    return branches[-1]


def physical_bell_protocol(
    state: FockState,
    a: int,
    b: int,
    config: MeasurementConfig,
    detectors: DetectorModel,
    rng: np.random.Generator,
    branches: Sequence[PhotonBranch] | None = None,
) -> BellProtocolResult:
    """Run the two-round photodetection protocol once.

    The photon-number history is sampled first, then detector loss and dark
    counts; the post state is the sampled branch (measured ensembles in
    vacuum). ``branches`` may be passed to reuse a precomputed enumeration.
    """
    if branches is None:
        branches = protocol_branches(state, a, b, config)
    branch = sample_branch(branches, rng)
    r1 = sample_detection(branch.photons[0], detectors, rng)
    r2 = sample_detection(branch.photons[1], detectors, rng)
    clicks = ClickRecord((r1, r2))
    verdict = classify_clicks(clicks, config)
    return BellProtocolResult(clicks, verdict, certified_outcome(verdict, config), branch.post, branch.photons)


def round_click_distribution(photons: tuple[int, int], detectors: DetectorModel) -> dict[tuple[int, int], float]:
    """Exact distribution of one round's (D1, D2) readings."""
    eta, d = detectors.efficiency, detectors.dark_count_prob
    per_detector = []
    for n in photons:
        dist: dict = {}
        for k in range(n + 1):
            pk = math.comb(n, k) * eta ** k * (1 - eta) ** (n - k)
            for dark, pd in ((0, 1 - d), (1, d)):
                c = k + dark
                if not detectors.number_resolving:
                    c = min(c, 1)
                dist[c] = dist.get(c, 0.0) + pk * pd
        per_detector.append(dist)
    return {
        (c1, c2): p1 * p2
        for c1, p1 in per_detector[0].items()
        for c2, p2 in per_detector[1].items()
    }


def _frame_class(bell_input: BellOutcome, config: MeasurementConfig) -> BellOutcome:
    if config is MeasurementConfig.PSI:
        return bell_input
    return {
        BellOutcome.PHI_PLUS: BellOutcome.PHI_PLUS,
        BellOutcome.PHI_MINUS: BellOutcome.PSI_PLUS,
        BellOutcome.PSI_PLUS: BellOutcome.PHI_MINUS,
        BellOutcome.PSI_MINUS: BellOutcome.PSI_MINUS,
    }[bell_input]


def _photon_histories(frame: BellOutcome) -> list[tuple[float, tuple]]:
    # psi inputs send one photon per round to a single detector; phi inputs
    # send both photons to one detector in one round (HOM bunching)
    if frame is BellOutcome.PSI_PLUS:
        return [(0.5, ((1, 0), (1, 0))), (0.5, ((0, 1), (0, 1)))]
    if frame is BellOutcome.PSI_MINUS:
        return [(0.5, ((1, 0), (0, 1))), (0.5, ((0, 1), (1, 0)))]
    return [
        (0.25, ((2, 0), (0, 0))),
        (0.25, ((0, 2), (0, 0))),
        (0.25, ((0, 0), (2, 0))),
        (0.25, ((0, 0), (0, 2))),
    ]


def verdict_distribution(
    bell_input: BellOutcome, config: MeasurementConfig, detectors: DetectorModel
) -> dict[Verdict, float]:
    """Closed-form verdict probabilities for a Bell-state input."""
    dist = {v: 0.0 for v in Verdict}
    for weight, (ph1, ph2) in _photon_histories(_frame_class(bell_input, config)):
        d1 = round_click_distribution(ph1, detectors)
        d2 = round_click_distribution(ph2, detectors)
        for c1, p1 in d1.items():
            for c2, p2 in d2.items():
                dist[classify_clicks(ClickRecord((c1, c2)), config)] += weight * p1 * p2
    return dist


@lru_cache(maxsize=None)
def acceptance_probability(
    bell_input: BellOutcome, config: MeasurementConfig, detectors: DetectorModel
) -> float:
    """Probability that the protocol certifies some Bell outcome."""
    dist = verdict_distribution(bell_input, config, detectors)
    return dist[Verdict.PSI_PLUS] + dist[Verdict.PSI_MINUS]


def bell_state(register, a: int, b: int, outcome: BellOutcome) -> FockState:
    """Bell state on ensembles a, b of an otherwise-vacuum register."""
    return prepare_entangled(vacuum_state(register), [a, b], outcome.vector)


def outcome_fidelity(state: FockState, a: int, b: int, outcome: BellOutcome) -> float:
    """Overlap of a two-ensemble input with a Bell state."""
    return fidelity(state, bell_state(state.register, a, b, outcome))
