"""Command-line front end.

    ensembleqc bell --state psi+ --eta 0.9 --trials 10000 --seed 1
    ensembleqc dj --oracle F3 --cnot teleported --seed 7 --format csv
    ensembleqc sweep --protocol bell --param efficiency --start 0.5 --stop 1 --step 0.1 --seed 3

Exit codes: 0 success, 2 invalid configuration, 3 self-check failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .harness import ConfigError, ExperimentSpec, emit, run_sweep, run_trials
from .selfcheck import run_self_check

log = logging.getLogger("ensembleqc")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SELF_CHECK = 3

# flag dest -> ExperimentSpec field
SPEC_KEYS = {
    "state": "state",
    "oracle": "oracle",
    "backend": "backend",
    "config": "config",
    "oracle_form": "oracle_form",
    "cnot": "cnot",
    "eta": "efficiency",
    "dark": "dark_count_prob",
    "number_resolving": "number_resolving",
    "trials": "trials",
    "seed": "seed",
}
RUN_KEYS = ("format", "out", "workers", "no_timing", "self_check")
SWEEP_KEYS = ("protocol", "param", "start", "stop", "step")
FILE_ALIASES = {"efficiency": "eta", "dark_count_prob": "dark", "parameter": "param"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    # defaults stay None so config-file values can fill the gaps
    p.add_argument("--state", help="bell: phi+|phi-|psi+|psi-; cnot: control+target from 0,1,+,- (e.g. +-)")
    p.add_argument("--oracle", choices=["F1", "F2", "F3", "F4"])
    p.add_argument("--backend", choices=["ideal", "physical"])
    p.add_argument("--config", choices=["psi", "phi", "random"], help="physical Bell-measurement configuration")
    p.add_argument("--oracle-form", dest="oracle_form", choices=["direct", "decomposed"])
    p.add_argument("--cnot", choices=["direct", "teleported"])
    p.add_argument("--eta", type=float, help="detector efficiency")
    p.add_argument("--dark", type=float, help="dark-count probability per detector per round")
    p.add_argument("--number-resolving", dest="number_resolving", action="store_const", const=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help="master seed (required; no environment default)")
    p.add_argument("--format", choices=["json", "csv"])
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--workers", type=int, help="worker processes for trials")
    p.add_argument("--no-timing", dest="no_timing", action="store_const", const=True,
                   help="report wall_time_seconds as 0 for byte-reproducible output")
    p.add_argument("--self-check", dest="self_check", action="store_const", const=True)
    p.add_argument("--config-file", dest="config_file", help="flat TOML file of defaults; flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ensembleqc", description="Atomic-ensemble protocol simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (
        ("bell", "two-round photodetection Bell measurement"),
        ("chi", "chi resource from two GHZ states"),
        ("cnot", "teleported C-NOT"),
        ("dj", "two-qubit Deutsch-Jozsa"),
    ):
        _add_common(sub.add_parser(name, help=text))
    sweep = sub.add_parser("sweep", help="parameter sweep over detector efficiency or dark counts")
    _add_common(sweep)
    sweep.add_argument("--protocol", choices=["bell", "chi", "cnot", "dj"])
    sweep.add_argument("--param", choices=["efficiency", "dark_count_prob"])
    sweep.add_argument("--start", type=float)
    sweep.add_argument("--stop", type=float)
    sweep.add_argument("--step", type=float)
    return parser


def load_config_file(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid config file {path}: {exc}") from None
    out = {}
    known = set(SPEC_KEYS) | set(RUN_KEYS) | set(SWEEP_KEYS)
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError(f"config file {path} must be flat; found table [{key}]")
        key = FILE_ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in config file {path}")
        out[key] = value
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over config-file values."""
    merged = load_config_file(args.config_file) if args.config_file else {}
    for key, value in vars(args).items():
        if value is not None:
            merged[key] = value
    return merged


def spec_from(settings: dict, protocol: str) -> ExperimentSpec:
    kwargs = {SPEC_KEYS[k]: v for k, v in settings.items() if k in SPEC_KEYS}
    if "seed" not in kwargs:
        raise ConfigError("a seed is required (--seed or 'seed' in the config file)")
    return ExperimentSpec(protocol=protocol, **kwargs).validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        settings = resolve(args)
        if args.command == "sweep":
            protocol = settings.get("protocol")
            if protocol is None:
                raise ConfigError("sweep needs --protocol")
            missing = [k for k in ("param", "start", "stop", "step") if settings.get(k) is None]
            if missing:
                raise ConfigError(f"sweep needs {', '.join('--' + m for m in missing)}")
        else:
            protocol = args.command
        spec = spec_from(settings, protocol)
        fmt = settings.get("format", "json")
        if fmt not in ("json", "csv"):
            raise ConfigError(f"format must be json or csv, got {fmt!r}")
        workers = int(settings.get("workers", 1))
        if workers < 1:
            raise ConfigError("workers must be >= 1")
    except ConfigError as exc:
        print(f"ensembleqc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if settings.get("self_check"):
        failures = run_self_check()
        if failures:
            for f in failures:
                print(f"self-check failed: {f}", file=sys.stderr)
            return EXIT_SELF_CHECK
        log.info("self-check passed")

    try:
        if args.command == "sweep":
            result = run_sweep(spec, settings["param"], settings["start"], settings["stop"], settings["step"], workers)
        else:
            result = run_trials(spec, workers)
    except ConfigError as exc:
        print(f"ensembleqc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = settings.get("out")
    if out and out != "-":
        Path(out).parent.mkdir(parents=True, exist_ok=True)
    emit(result, fmt, out, timing=not settings.get("no_timing", False))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
