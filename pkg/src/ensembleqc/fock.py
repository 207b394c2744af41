"""Truncated Fock-space states over a register of bosonic modes.

States are sparse maps from occupation tuples to complex amplitudes. Every
operation returns a new state; nothing is mutated in place.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

PRUNE_THRESHOLD = 1e-14
UNITARY_ATOL = 1e-10

Occupation = tuple  # tuple[int, ...], one entry per register mode


class RegistryError(ValueError):
    """Raised for unknown, duplicated or retired modes and ensembles."""


class ModeKind(str, Enum):
    ATOMIC_H = "atomic-h"
    ATOMIC_V = "atomic-v"
    PHOTONIC = "photonic"


@dataclass(frozen=True)
class Mode:
    label: str
    kind: ModeKind
    owner: int | None = None


def h_label(ensemble: int) -> str:
    return f"h{ensemble}"


def v_label(ensemble: int) -> str:
    return f"v{ensemble}"


@dataclass(frozen=True)
class ModeRegister:
    """Ordered set of modes with a shared per-mode occupation cutoff.

    ``retired`` holds ensemble ids that were measured and removed; they can
    never be registered again.
    """

    modes: tuple[Mode, ...]
    cutoff: int = 2
    retired: frozenset = frozenset()
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.cutoff < 2:
            raise ValueError(f"cutoff must be >= 2, got {self.cutoff}")
        index = {}
        for i, mode in enumerate(self.modes):
            if mode.label in index:
                raise RegistryError(f"duplicate mode label {mode.label!r}")
            index[mode.label] = i
        owners = defaultdict(list)
        for mode in self.modes:
            if mode.kind is ModeKind.PHOTONIC:
                continue
            if mode.owner is None:
                raise RegistryError(f"atomic mode {mode.label!r} has no owning ensemble")
            owners[mode.owner].append(mode.kind)
        for owner, kinds in owners.items():
            if sorted(kinds) != [ModeKind.ATOMIC_H, ModeKind.ATOMIC_V]:
                raise RegistryError(f"ensemble {owner} must own exactly one h and one v mode")
            if owner in self.retired:
                raise RegistryError(f"ensemble {owner} was retired and cannot be reused")
        object.__setattr__(self, "_index", MappingProxyType(index))

    @classmethod
    def for_ensembles(cls, ensembles: Iterable[int], cutoff: int = 2) -> "ModeRegister":
        modes = []
        for e in ensembles:
            modes.append(Mode(h_label(e), ModeKind.ATOMIC_H, e))
            modes.append(Mode(v_label(e), ModeKind.ATOMIC_V, e))
        return cls(tuple(modes), cutoff)

    def __len__(self) -> int:
        return len(self.modes)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.modes)

    @property
    def ensembles(self) -> tuple[int, ...]:
        seen = []
        for m in self.modes:
            if m.kind is ModeKind.ATOMIC_H:
                seen.append(m.owner)
        return tuple(seen)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise RegistryError(f"unknown mode {label!r}") from None

    def ensemble_modes(self, ensemble: int) -> tuple[str, str]:
        """(h, v) labels of an ensemble; raises for unregistered ids."""
        h, v = h_label(ensemble), v_label(ensemble)
        if h not in self._index or v not in self._index:
            if ensemble in self.retired:
                raise RegistryError(f"ensemble {ensemble} was measured and retired")
            raise RegistryError(f"unknown ensemble {ensemble}")
        return h, v

    def with_modes(self, extra: Sequence[Mode]) -> "ModeRegister":
        return ModeRegister(self.modes + tuple(extra), self.cutoff, self.retired)

    def without(self, labels: Iterable[str], retire: Iterable[int] = ()) -> "ModeRegister":
        drop = set(labels)
        for label in drop:
            self.index(label)
        kept = tuple(m for m in self.modes if m.label not in drop)
        return ModeRegister(kept, self.cutoff, self.retired | frozenset(retire))

    def fresh_photon_label(self, ensemble: int) -> str:
        label = f"p{ensemble}"
        k = 1
        while label in self._index:
            label = f"p{ensemble}.{k}"
            k += 1
        return label


class FockState:
    """Sparse complex amplitudes over occupation-number basis states.

    ``lost_weight`` accumulates probability weight dropped by cutoff
    truncation; it stays 0.0 for every protocol in this package.
    """

    __slots__ = ("register", "_amps", "lost_weight")

    def __init__(
        self,
        register: ModeRegister,
        amplitudes: Mapping[Occupation, complex],
        lost_weight: float = 0.0,
    ):
        n = len(register)
        amps = {}
        for occ, amp in amplitudes.items():
            amp = complex(amp)
            if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
                raise ValueError(f"non-finite amplitude at {occ}")
            if abs(amp) < PRUNE_THRESHOLD:
                continue
            occ = tuple(int(k) for k in occ)
            if len(occ) != n:
                raise ValueError(f"occupation {occ} does not match register size {n}")
            if any(k < 0 or k > register.cutoff for k in occ):
                raise ValueError(f"occupation {occ} outside [0, {register.cutoff}]")
            amps[occ] = amp
        self.register = register
        self._amps = amps
        self.lost_weight = float(lost_weight)

    @property
    def amplitudes(self) -> Mapping[Occupation, complex]:
        return MappingProxyType(self._amps)

    def items(self):
        return self._amps.items()

    def __len__(self) -> int:
        return len(self._amps)

    def __repr__(self) -> str:
        terms = ", ".join(f"{occ}: {amp:.6g}" for occ, amp in sorted(self._amps.items()))
        return f"FockState({{{terms}}}, modes={self.register.labels})"

    def amplitude(self, occ: Occupation) -> complex:
        return self._amps.get(tuple(occ), 0j)

    def norm_squared(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self._amps.values())

    def norm(self) -> float:
        return math.sqrt(self.norm_squared())

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(self.norm_squared() - 1.0) < tol

    def is_zero(self) -> bool:
        return not self._amps

    def normalized(self) -> "FockState":
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero state")
        return FockState(self.register, {k: a / nrm for k, a in self._amps.items()}, self.lost_weight)

    def scaled(self, factor: complex) -> "FockState":
        return FockState(self.register, {k: a * factor for k, a in self._amps.items()}, self.lost_weight)

    def __add__(self, other: "FockState") -> "FockState":
        _check_same_register(self, other)
        out = dict(self._amps)
        for k, a in other._amps.items():
            out[k] = out.get(k, 0j) + a
        return FockState(self.register, out, self.lost_weight + other.lost_weight)

    def __sub__(self, other: "FockState") -> "FockState":
        return self + other.scaled(-1)

    def occupation_of(self, occ: Occupation, label: str) -> int:
        return occ[self.register.index(label)]


def _check_same_register(a: FockState, b: FockState) -> None:
    if a.register.labels != b.register.labels:
        raise RegistryError(
            f"register mismatch: {a.register.labels} vs {b.register.labels}"
        )


def zero_state(register: ModeRegister) -> FockState:
    return FockState(register, {})


def vacuum_state(register: ModeRegister) -> FockState:
    return FockState(register, {(0,) * len(register): 1.0})


def basis_state(register: ModeRegister, occupations: Mapping[str, int]) -> FockState:
    """Single basis ket with the given labelled occupations, rest zero."""
    occ = [0] * len(register)
    for label, n in occupations.items():
        occ[register.index(label)] = n
    return FockState(register, {tuple(occ): 1.0})


def apply_creation(state: FockState, mode: str) -> FockState:
    i = state.register.index(mode)
    cutoff = state.register.cutoff
    out = {}
    lost = state.lost_weight
    for occ, amp in state.items():
        n = occ[i]
        if n >= cutoff:
            lost += abs(amp) ** 2
            continue
        new = occ[:i] + (n + 1,) + occ[i + 1:]
        out[new] = amp * math.sqrt(n + 1)
    return FockState(state.register, out, lost)


def apply_annihilation(state: FockState, mode: str) -> FockState:
    i = state.register.index(mode)
    out = {}
    for occ, amp in state.items():
        n = occ[i]
        if n == 0:
            continue
        new = occ[:i] + (n - 1,) + occ[i + 1:]
        out[new] = amp * math.sqrt(n)
    return FockState(state.register, out, state.lost_weight)


def check_unitary(matrix: np.ndarray, atol: float = UNITARY_ATOL) -> np.ndarray:
    u = np.asarray(matrix, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    if not np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=atol, rtol=0):
        raise ValueError("matrix is not unitary within tolerance")
    return u


def _expand_creation_monomial(local: tuple, u: np.ndarray) -> dict:
    """Image of the normalized Fock ket ``local`` under a† -> U^T a†.

    Multiplies out prod_i (sum_j U[j, i] a_j†)^n_i and converts monomials back
    to normalized kets.
    """
    k = len(local)
    poly = {(0,) * k: 1.0 + 0j}
    for i, n in enumerate(local):
        column = [(j, u[j, i]) for j in range(k) if u[j, i] != 0]
        for _ in range(n):
            nxt = defaultdict(complex)
            for mono, c in poly.items():
                for j, uji in column:
                    m = mono[:j] + (mono[j] + 1,) + mono[j + 1:]
                    nxt[m] += c * uji
            poly = nxt
    denom = math.sqrt(math.prod(math.factorial(n) for n in local))
    return {
        mono: c * math.sqrt(math.prod(math.factorial(m) for m in mono)) / denom
        for mono, c in poly.items()
    }


def apply_mode_unitary(state: FockState, modes: Sequence[str], matrix) -> FockState:
    """Passive linear transformation a_i† -> sum_j matrix[j, i] a_j† on ``modes``."""
    if len(set(modes)) != len(modes):
        raise ValueError(f"repeated mode labels in {list(modes)}")
    u = check_unitary(matrix)
    if u.shape[0] != len(modes):
        raise ValueError(f"matrix is {u.shape[0]}x{u.shape[0]} but {len(modes)} modes given")
    idx = [state.register.index(m) for m in modes]
    cutoff = state.register.cutoff
    cache = {}
    out = defaultdict(complex)
    for occ, amp in state.items():
        local = tuple(occ[i] for i in idx)
        image = cache.get(local)
        if image is None:
            image = cache[local] = _expand_creation_monomial(local, u)
        base = list(occ)
        for mono, c in image.items():
            for i, m in zip(idx, mono):
                base[i] = m
            out[tuple(base)] += amp * c
    lost = state.lost_weight
    kept = {}
    for occ, amp in out.items():
        if max(occ[i] for i in idx) > cutoff:
            lost += abs(amp) ** 2
        else:
            kept[occ] = amp
    return FockState(state.register, kept, lost)


def inner_product(a: FockState, b: FockState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    _check_same_register(a, b)
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    total = 0j
    for occ, amp in small.items():
        other = large._amps.get(occ)
        if other is not None:
            total += amp.conjugate() * other if small is a else other.conjugate() * amp
    return total


def fidelity(a: FockState, b: FockState) -> float:
    """|<a|b>|^2 of the normalized states; global phase drops out."""
    na, nb = a.norm(), b.norm()
    if na == 0.0 or nb == 0.0:
        return 0.0
    return abs(inner_product(a, b)) ** 2 / (na * nb) ** 2


def project_occupation(state: FockState, mode: str, n: int) -> tuple[float, FockState]:
    i = state.register.index(mode)
    if not 0 <= n <= state.register.cutoff:
        raise ValueError(f"occupation {n} outside [0, {state.register.cutoff}]")
    total = state.norm_squared()
    kept = {occ: amp for occ, amp in state.items() if occ[i] == n}
    post = FockState(state.register, kept, state.lost_weight)
    if total == 0.0 or post.is_zero():
        return 0.0, zero_state(state.register)
    prob = post.norm_squared() / total
    return prob, post.normalized()


def total_excitation(state: FockState, modes: Sequence[str]) -> dict[int, float]:
    """Distribution of the summed occupation over ``modes``."""
    if not modes:
        raise ValueError("mode subset must be nonempty")
    idx = [state.register.index(m) for m in modes]
    total = state.norm_squared()
    dist = defaultdict(float)
    for occ, amp in state.items():
        dist[sum(occ[i] for i in idx)] += abs(amp) ** 2
    return {k: w / total for k, w in sorted(dist.items())}


def add_modes(state: FockState, modes: Sequence[Mode]) -> FockState:
    """Extend the register with new modes in vacuum."""
    register = state.register.with_modes(modes)
    pad = (0,) * len(modes)
    return FockState(register, {occ + pad: a for occ, a in state.items()}, state.lost_weight)


def remove_modes(
    state: FockState, labels: Sequence[str], retire: Iterable[int] = ()
) -> FockState:
    """Drop modes that are in vacuum on every term.

    Ensemble ids in ``retire`` are recorded as permanently unavailable.
    """
    idx = [state.register.index(m) for m in labels]
    drop = set(idx)
    out = {}
    for occ, amp in state.items():
        if any(occ[i] for i in idx):
            raise ValueError(f"modes {list(labels)} are not in vacuum")
        out[tuple(k for i, k in enumerate(occ) if i not in drop)] = amp
    return FockState(state.register.without(labels, retire), out, state.lost_weight)


def absorb_modes(state: FockState, labels: Sequence[str]) -> FockState:
    """Remove modes whose occupation is identical on every term.

    Models detected (or lost) photons leaving the system after a photon
    number projection.
    """
    idx = [state.register.index(m) for m in labels]
    drop = set(idx)
    out = {}
    signature = None
    for occ, amp in state.items():
        sig = tuple(occ[i] for i in idx)
        if signature is None:
            signature = sig
        elif sig != signature:
            raise ValueError(f"modes {list(labels)} do not carry a definite occupation")
        out[tuple(k for i, k in enumerate(occ) if i not in drop)] = amp
    return FockState(state.register.without(labels), out, state.lost_weight)


def split_by_occupation(state: FockState, labels: Sequence[str]) -> list[tuple[tuple, float, FockState]]:
    """Photon-number resolved branches over ``labels``.

    Returns (occupations, probability, normalized post state with the modes
    absorbed) for every occupation pattern with support, sorted by pattern.
    """
    idx = [state.register.index(m) for m in labels]
    drop = set(idx)
    total = state.norm_squared()
    groups = defaultdict(dict)
    for occ, amp in state.items():
        sig = tuple(occ[i] for i in idx)
        groups[sig][tuple(k for i, k in enumerate(occ) if i not in drop)] = amp
    register = state.register.without(labels)
    branches = []
    for sig in sorted(groups):
        branch = FockState(register, groups[sig], state.lost_weight)
        weight = branch.norm_squared()
        if weight == 0.0:
            continue
        branches.append((sig, weight / total, branch.normalized()))
    return branches


def swap_occupations(state: FockState, mode_a: str, mode_b: str) -> FockState:
    """Exchange the occupations of two modes on every term."""
    i, j = state.register.index(mode_a), state.register.index(mode_b)
    out = {}
    for occ, amp in state.items():
        new = list(occ)
        new[i], new[j] = occ[j], occ[i]
        out[tuple(new)] = amp
    return FockState(state.register, out, state.lost_weight)


BEAM_SPLITTER = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
