"""Seeded Monte Carlo runner, parameter sweeps and JSON/CSV output.

Trial ``i`` of an experiment draws from its own generator derived from
(seed, i), so aggregates do not depend on execution order or on how trials
are split across worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .bell import (
    BELL_STATE_NAMES,
    BellOutcome,
    DetectorModel,
    MeasurementConfig,
    Verdict,
    bell_state,
    ideal_bell_measure,
    physical_bell_protocol,
    protocol_branches,
)
from .dj import CnotKind, DJBackend, DJVerdict, OracleForm, OracleId, expected_verdict, run_dj
from .fock import ModeRegister, fidelity, vacuum_state
from .qubits import prepare_entangled
from .teleport import (
    CONTROL_OUT,
    TARGET_OUT,
    MeasurementBackend,
    chi_state,
    ghz_pair_state,
    matrix_cnot_reference,
    prepare_chi,
    run_teleported_cnot,
)

PROTOCOLS = ("bell", "chi", "cnot", "dj")
SWEEP_PARAMETERS = ("efficiency", "dark_count_prob")
Z_95 = 1.959963984540054

_S = 1 / math.sqrt(2.0)
QUBIT_NAMES = {
    "0": np.array([1.0, 0.0]),
    "1": np.array([0.0, 1.0]),
    "+": np.array([_S, _S]),
    "-": np.array([_S, -_S]),
}


class ConfigError(ValueError):
    """Invalid experiment configuration, detected before any trial runs."""


@dataclass(frozen=True)
class ExperimentSpec:
    protocol: str = "bell"
    state: str | None = None
    oracle: str = "F1"
    backend: str = "physical"
    config: str = "psi"
    oracle_form: str = "decomposed"
    cnot: str = "direct"
    efficiency: float = 1.0
    dark_count_prob: float = 0.0
    number_resolving: bool = False
    trials: int = 1000
    seed: int = 0

    def validate(self) -> "ExperimentSpec":
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.backend not in ("ideal", "physical"):
            raise ConfigError(f"backend must be 'ideal' or 'physical', got {self.backend!r}")
        allowed = ("psi", "phi") if self.protocol == "bell" else ("psi", "phi", "random")
        if self.config not in allowed:
            raise ConfigError(f"config must be one of {allowed} for {self.protocol}, got {self.config!r}")
        try:
            self.detectors()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.protocol == "bell" and self.input_state() not in BELL_STATE_NAMES:
            raise ConfigError(f"bell state must be one of {sorted(BELL_STATE_NAMES)}, got {self.state!r}")
        if self.protocol == "cnot":
            s = self.input_state()
            if len(s) != 2 or any(c not in QUBIT_NAMES for c in s):
                raise ConfigError(f"cnot state must be two of {sorted(QUBIT_NAMES)} (control, target), got {s!r}")
        if self.protocol == "dj":
            if self.oracle not in OracleId.__members__:
                raise ConfigError(f"oracle must be one of F1..F4, got {self.oracle!r}")
            if self.oracle_form not in ("direct", "decomposed"):
                raise ConfigError(f"oracle_form must be 'direct' or 'decomposed', got {self.oracle_form!r}")
            if self.cnot not in ("direct", "teleported"):
                raise ConfigError(f"cnot must be 'direct' or 'teleported', got {self.cnot!r}")
        return self

    def input_state(self) -> str:
        if self.state is not None:
            return self.state
        return {"bell": "psi+", "cnot": "+-"}.get(self.protocol, "")

    def detectors(self) -> DetectorModel:
        return DetectorModel(float(self.efficiency), float(self.dark_count_prob), bool(self.number_resolving))

    def measurement_backend(self) -> MeasurementBackend:
        if self.backend == "ideal":
            return MeasurementBackend.ideal()
        return MeasurementBackend.physical(self.config, self.detectors())

    def replace(self, **changes) -> "ExperimentSpec":
        return ExperimentSpec(**{**asdict(self), **changes})


def verdict_names(spec: ExperimentSpec) -> tuple[str, ...]:
    """Fixed verdict classes per protocol; every class is always reported."""
    if spec.protocol == "bell":
        if spec.backend == "ideal":
            return tuple(o.value for o in BellOutcome) + ("Failure",)
        return tuple(v.value for v in Verdict)
    if spec.protocol == "dj":
        return (DJVerdict.CONSTANT.value, DJVerdict.BALANCED.value, "Discard")
    return ("Accepted", "Discard")


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one trial, derived from (seed, index) alone."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


@lru_cache(maxsize=32)
def _bell_setup(state_name: str, config: str):
    register = ModeRegister.for_ensembles([1, 2])
    expected = BELL_STATE_NAMES[state_name]
    state = bell_state(register, 1, 2, expected)
    return state, expected, protocol_branches(state, 1, 2, MeasurementConfig(config))


def _trial_bell(spec: ExperimentSpec, rng):
    state, expected, branches = _bell_setup(spec.input_state(), spec.config)
    if spec.backend == "ideal":
        m = ideal_bell_measure(state, 1, 2, rng)
        if m.outcome is None:
            return "Failure", False, None
        return m.outcome.value, True, float(m.outcome is expected)
    r = physical_bell_protocol(state, 1, 2, MeasurementConfig(spec.config), spec.detectors(), rng, branches)
    if r.outcome is None:
        return r.verdict.value, False, None
    # Bell states are orthonormal: overlap with the certified state is 1 or 0
    return r.verdict.value, True, float(r.outcome is expected)


def _trial_chi(spec: ExperimentSpec, rng):
    state = ghz_pair_state()
    post, log = prepare_chi(state, (1, 2, 3, 4, 5, 6), spec.measurement_backend(), rng)
    if not log.accepted:
        return "Discard", False, None
    return "Accepted", True, fidelity(post, chi_state(post.register))


def _trial_cnot(spec: ExperimentSpec, rng):
    c, t = (QUBIT_NAMES[k] for k in spec.input_state())
    result = run_teleported_cnot(c, t, spec.measurement_backend(), rng)
    if not result.log.accepted:
        return "Discard", False, None
    reference = prepare_entangled(
        vacuum_state(result.state.register), [CONTROL_OUT, TARGET_OUT], matrix_cnot_reference(c, t)
    )
    return "Accepted", True, fidelity(result.state, reference)


def _trial_dj(spec: ExperimentSpec, rng):
    oracle = OracleId(spec.oracle)
    backend = DJBackend(
        OracleForm(spec.oracle_form),
        CnotKind(spec.cnot),
        spec.measurement_backend(),
        physical_readout=spec.backend == "physical",
    )
    result = run_dj(oracle, backend, spec.detectors(), rng)
    if result.verdict is None:
        return "Discard", False, None
    return result.verdict.value, True, float(result.verdict is expected_verdict(oracle))


_TRIALS = {"bell": _trial_bell, "chi": _trial_chi, "cnot": _trial_cnot, "dj": _trial_dj}


def run_trial(spec: ExperimentSpec, index: int):
    """(verdict name, accepted, fidelity or None) for trial ``index``."""
    return _TRIALS[spec.protocol](spec, trial_rng(spec.seed, index))


def _run_chunk(spec: ExperimentSpec, start: int, stop: int):
    return [run_trial(spec, i) for i in range(start, stop)]


@dataclass
class TrialStats:
    spec: dict
    n_trials: int
    n_accepted: int
    acceptance_rate: float
    acceptance_halfwidth: float
    verdicts: dict
    conditional_fidelity_mean: float | None
    conditional_fidelity_min: float | None
    wall_time_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "spec": dict(self.spec),
            "n_trials": self.n_trials,
            "n_accepted": self.n_accepted,
            "acceptance_rate": self.acceptance_rate,
            "acceptance_halfwidth": self.acceptance_halfwidth,
            "verdicts": dict(self.verdicts),
            "conditional_fidelity_mean": self.conditional_fidelity_mean,
            "conditional_fidelity_min": self.conditional_fidelity_min,
            "wall_time_seconds": self.wall_time_seconds,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrialStats":
        return cls(**{f.name: data[f.name] for f in fields(cls)})

    @property
    def conditional_error_rate(self) -> float | None:
        if self.conditional_fidelity_mean is None:
            return None
        return 1.0 - self.conditional_fidelity_mean


def binomial_halfwidth(successes: int, n: int, z: float = Z_95) -> float:
    """Normal-approximation half-width z * sqrt(p (1 - p) / n), p = successes / n."""
    p = successes / n
    return z * math.sqrt(p * (1.0 - p) / n)


def aggregate(spec: ExperimentSpec, records: Sequence[tuple], wall_time: float = 0.0) -> TrialStats:
    counts = {name: 0 for name in verdict_names(spec)}
    fids = []
    n_accepted = 0
    for verdict, accepted, fid in records:
        counts[verdict] += 1
        if accepted:
            n_accepted += 1
            fids.append(fid)
    n = len(records)
    return TrialStats(
        spec=asdict(spec),
        n_trials=n,
        n_accepted=n_accepted,
        acceptance_rate=n_accepted / n,
        acceptance_halfwidth=binomial_halfwidth(n_accepted, n),
        verdicts=counts,
        conditional_fidelity_mean=math.fsum(fids) / len(fids) if fids else None,
        conditional_fidelity_min=min(fids) if fids else None,
        wall_time_seconds=wall_time,
    )


def run_trials(spec: ExperimentSpec, workers: int = 1) -> TrialStats:
    """Run ``spec.trials`` independent trials, serially or across processes."""
    spec.validate()
    start = time.perf_counter()
    if workers <= 1:
        records = _run_chunk(spec, 0, spec.trials)
    else:
        bounds = np.linspace(0, spec.trials, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [spec] * workers, bounds[:-1].tolist(), bounds[1:].tolist())
            records = [r for part in parts for r in part]
    return aggregate(spec, records, time.perf_counter() - start)


@dataclass
class SweepResult:
    parameter: str
    values: list
    rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"parameter": self.parameter, "rows": [r.to_dict() for r in self.rows]}


def sweep_grid(start: float, stop: float, step: float) -> list[float]:
    if step <= 0:
        raise ConfigError(f"step must be positive, got {step}")
    if stop < start:
        raise ConfigError(f"stop ({stop}) is below start ({start})")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(n)]


def run_sweep(
    base: ExperimentSpec, parameter: str, start: float, stop: float, step: float, workers: int = 1
) -> SweepResult:
    """One :class:`TrialStats` row per grid value, all rows sharing the base seed."""
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMETERS}, got {parameter!r}")
    values = sweep_grid(start, stop, step)
    specs = [base.replace(**{parameter: v}) for v in values]
    for s in specs:
        s.validate()
    result = SweepResult(parameter, values)
    for s in specs:
        result.rows.append(run_trials(s, workers))
    return result


def format_float(x: float) -> str:
    """17 significant digits, always recognisable as a float."""
    text = format(x, ".17g")
    if text.lstrip("-").isdigit():
        text += ".0"
    return text


def _to_json(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError("non-finite number in output")
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_to_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


STAT_COLUMNS = (
    "n_trials",
    "n_accepted",
    "acceptance_rate",
    "acceptance_halfwidth",
    "conditional_fidelity_mean",
    "conditional_fidelity_min",
    "wall_time_seconds",
)


def csv_columns(stats: TrialStats) -> list[str]:
    """spec.* in field order, the statistics, then verdicts.* in protocol order."""
    spec_cols = [f"spec.{f.name}" for f in fields(ExperimentSpec)]
    return spec_cols + list(STAT_COLUMNS) + [f"verdicts.{k}" for k in stats.verdicts]


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def _csv_row(stats: TrialStats) -> list[str]:
    d = stats.to_dict()
    row = [_csv_cell(d["spec"][f.name]) for f in fields(ExperimentSpec)]
    row += [_csv_cell(d[c]) for c in STAT_COLUMNS]
    row += [_csv_cell(v) for v in d["verdicts"].values()]
    return row


def render(result: TrialStats | SweepResult, fmt: str = "json", timing: bool = True) -> str:
    """Serialize stats or a sweep; ``timing=False`` zeroes wall-clock fields."""
    rows = result.rows if isinstance(result, SweepResult) else [result]
    if not timing:
        rows = [TrialStats(**{**r.__dict__, "wall_time_seconds": 0.0}) for r in rows]
    if fmt == "json":
        if isinstance(result, SweepResult):
            return _to_json({"parameter": result.parameter, "rows": [r.to_dict() for r in rows]}) + "\n"
        return _to_json(rows[0].to_dict()) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(csv_columns(rows[0]))
        for r in rows:
            writer.writerow(_csv_row(r))
        return buf.getvalue()
    raise ConfigError(f"format must be 'json' or 'csv', got {fmt!r}")


def emit(result: TrialStats | SweepResult, fmt: str = "json", destination: str | Path | None = None, timing: bool = True) -> None:
    """Write rendered output to ``destination`` or standard output."""
    text = render(result, fmt, timing)
    if destination is None or str(destination) == "-":
        sys.stdout.write(text)
        return
    path = Path(destination)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror or exc}") from exc
