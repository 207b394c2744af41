"""Dual-rail qubits stored in atomic ensembles.

Logical |0> is one excitation in the ensemble's h mode, |1> one excitation in
its v mode. Raman pulses act as 2x2 unitaries on the (h, v) mode pair and the
anti-pump pulse moves the h excitation into a fresh photonic mode.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fock import (
    FockState,
    Mode,
    ModeKind,
    ModeRegister,
    add_modes,
    apply_creation,
    apply_mode_unitary,
    check_unitary,
    remove_modes,
    swap_occupations,
    vacuum_state,
)

_S = 1 / math.sqrt(2.0)


def hadamard() -> np.ndarray:
    return np.array([[_S, _S], [_S, -_S]])


def r_plus() -> np.ndarray:
    """|0> -> |1>, |1> -> -|0>."""
    return np.array([[0.0, -1.0], [1.0, 0.0]])


def r_minus() -> np.ndarray:
    """|0> -> -|1>, |1> -> |0>; the inverse of :func:`r_plus`."""
    return np.array([[0.0, 1.0], [-1.0, 0.0]])


def pi_swap() -> np.ndarray:
    """pi pulse exchanging the h and v modes (v excitation moves to h)."""
    return np.array([[0.0, 1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class LogicalQubitView:
    alpha: complex
    beta: complex
    leakage: float
    factorizable: bool = True

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta])


def ensemble_register(ensembles: Sequence[int], cutoff: int = 2) -> ModeRegister:
    return ModeRegister.for_ensembles(ensembles, cutoff)


def _local_indices(state: FockState, e: int) -> tuple[int, int]:
    h, v = state.register.ensemble_modes(e)
    return state.register.index(h), state.register.index(v)


def is_vacuum(state: FockState, e: int) -> bool:
    ih, iv = _local_indices(state, e)
    return all(occ[ih] == 0 and occ[iv] == 0 for occ, _ in state.items())


def add_ensembles(state: FockState, ensembles: Sequence[int]) -> FockState:
    modes = []
    for e in ensembles:
        modes.append(Mode(f"h{e}", ModeKind.ATOMIC_H, e))
        modes.append(Mode(f"v{e}", ModeKind.ATOMIC_V, e))
    return add_modes(state, modes)


def retire_ensembles(state: FockState, ensembles: Sequence[int]) -> FockState:
    """Remove measured (vacuum) ensembles; their ids can never be reused."""
    labels = [m for e in ensembles for m in state.register.ensemble_modes(e)]
    return remove_modes(state, labels, retire=ensembles)


def prepare_logical(state: FockState, e: int, alpha: complex, beta: complex) -> FockState:
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > 1e-10:
        raise ValueError("logical coefficients must satisfy |alpha|^2 + |beta|^2 = 1")
    if not is_vacuum(state, e):
        raise ValueError(f"ensemble {e} is not in vacuum")
    h, v = state.register.ensemble_modes(e)
    return apply_creation(state, h).scaled(alpha) + apply_creation(state, v).scaled(beta)


def prepare_product(register: ModeRegister, qubits: dict[int, Sequence[complex]]) -> FockState:
    """Product of logical qubits {ensemble: (alpha, beta)} on the register's vacuum."""
    state = vacuum_state(register)
    for e, (a, b) in qubits.items():
        state = prepare_logical(state, e, a, b)
    return state


def prepare_entangled(state: FockState, ensembles: Sequence[int], amplitudes) -> FockState:
    """Arbitrary n-qubit logical state on vacuum ensembles.

    ``amplitudes`` is indexed by the bit string over ``ensembles`` with the
    first ensemble most significant (0 = h, 1 = v).
    """
    amps = np.asarray(amplitudes, dtype=complex)
    n = len(ensembles)
    if amps.shape != (2 ** n,):
        raise ValueError(f"expected {2 ** n} amplitudes")
    if abs(np.vdot(amps, amps).real - 1.0) > 1e-10:
        raise ValueError("amplitudes are not normalized")
    for e in ensembles:
        if not is_vacuum(state, e):
            raise ValueError(f"ensemble {e} is not in vacuum")
    modes = [state.register.ensemble_modes(e) for e in ensembles]
    result = None
    for index, bits in enumerate(itertools.product((0, 1), repeat=n)):
        if amps[index] == 0:
            continue
        term = state
        for (h, v), bit in zip(modes, bits):
            term = apply_creation(term, v if bit else h)
        term = term.scaled(amps[index])
        result = term if result is None else result + term
    return result


def raman_rotation(state: FockState, e: int, u) -> FockState:
    """h† -> u00 h† + u10 v†, v† -> u01 h† + u11 v†."""
    h, v = state.register.ensemble_modes(e)
    return apply_mode_unitary(state, [h, v], u)


def apply_logical_gate(state: FockState, ensembles: Sequence[int], matrix) -> FockState:
    """Apply a 2^n x 2^n unitary to the dual-rail subspace of ``ensembles``.

    Ordering matches :func:`prepare_entangled`. Every term must hold exactly
    one excitation per listed ensemble.
    """
    u = check_unitary(matrix)
    n = len(ensembles)
    if u.shape[0] != 2 ** n:
        raise ValueError(f"gate acts on {u.shape[0]} states, {n} ensembles given")
    idx = [_local_indices(state, e) for e in ensembles]
    out: dict = {}
    for occ, amp in state.items():
        bits = []
        for ih, iv in idx:
            pair = (occ[ih], occ[iv])
            if pair == (1, 0):
                bits.append(0)
            elif pair == (0, 1):
                bits.append(1)
            else:
                raise ValueError("state leaves the dual-rail subspace of the gate's ensembles")
        col = int("".join(map(str, bits)), 2) if bits else 0
        for row in range(2 ** n):
            c = u[row, col]
            if c == 0:
                continue
            new = list(occ)
            for k, (ih, iv) in enumerate(idx):
                bit = (row >> (n - 1 - k)) & 1
                new[ih], new[iv] = (0, 1) if bit else (1, 0)
            key = tuple(new)
            out[key] = out.get(key, 0j) + amp * c
    return FockState(state.register, out, state.lost_weight)


def anti_pump(state: FockState, e: int) -> tuple[FockState, str]:
    """Move every h excitation of ensemble ``e`` into a new photonic mode."""
    h, _ = state.register.ensemble_modes(e)
    label = state.register.fresh_photon_label(e)
    state = add_modes(state, [Mode(label, ModeKind.PHOTONIC, None)])
    return swap_occupations(state, h, label), label


def restore_from_photon(state: FockState, e: int, photon: str) -> FockState:
    """Inverse of :func:`anti_pump`: write the photon back into h and drop its mode."""
    h, _ = state.register.ensemble_modes(e)
    for occ, _ in state.items():
        if occ[state.register.index(h)]:
            raise ValueError(f"h mode of ensemble {e} is occupied")
    state = swap_occupations(state, h, photon)
    return remove_modes(state, [photon])


def logical_view(state: FockState, e: int, tol: float = 1e-9) -> LogicalQubitView:
    """Read back ensemble ``e`` as a dual-rail qubit.

    Only meaningful when the single-excitation part factorizes from the rest
    of the register; otherwise the leakage=1 sentinel with
    ``factorizable=False`` is returned.
    """
    ih, iv = _local_indices(state, e)
    total = state.norm_squared()
    if total == 0.0:
        return LogicalQubitView(0j, 0j, 1.0)
    rows: dict = {}
    leak = 0.0
    for occ, amp in state.items():
        pair = (occ[ih], occ[iv])
        if pair not in ((1, 0), (0, 1)):
            leak += abs(amp) ** 2
            continue
        rest = tuple(k for i, k in enumerate(occ) if i not in (ih, iv))
        rows.setdefault(rest, [0j, 0j])[pair[1]] += amp
    leakage = leak / total
    if not rows:
        return LogicalQubitView(0j, 0j, 1.0)
    keys = sorted(rows)
    m = np.array([rows[k] for k in keys]) / math.sqrt(total)
    s = np.linalg.svd(m, compute_uv=False)
    if len(s) > 1 and s[1] > tol * max(s[0], 1e-300):
        return LogicalQubitView(0j, 0j, 1.0, factorizable=False)
    norms = np.linalg.norm(m, axis=1)
    lead = m[int(np.argmax(norms))]
    alpha, beta = lead / np.linalg.norm(lead) * s[0]
    return LogicalQubitView(complex(alpha), complex(beta), float(leakage))
