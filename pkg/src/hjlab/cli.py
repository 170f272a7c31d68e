"""Command line front end: ``hjlab run <config>``, ``hjlab list``, ``hjlab describe <id>``.

A config is an INI file::

    [experiment]
    id = ex2rate-stationary
    eps_ladder = 0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125

    [output]
    directory = ex2rate

Keys of ``[experiment]`` other than ``id`` override the experiment's default
parameters (see ``hjlab describe <id>``).  A relative output directory is
placed under ``$HJLAB_OUTPUT_ROOT`` when that variable is set, else under
``hjlab-output``.  ``run`` also accepts a bare experiment id to run with
defaults.

Exit status: 0 every check passed, 1 some check failed, 2 the config or the
command line could not be parsed or resolved, 3 a numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import re
import sys
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, HJLabError
from .experiments import REGISTRY, describe, list_experiments
from .hamiltonians import CATALOG

OUTPUT_ROOT_ENV = "HJLAB_OUTPUT_ROOT"
DEFAULT_ROOT = "hjlab-output"

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

_KEY_LINE = re.compile(r"^\s*([^=:\s][^=:]*?)\s*[=:]\s*")
_SECTION_LINE = re.compile(r"^\s*\[([^\]]+)\]")


@dataclass
class ExperimentConfig:
    """A parsed and resolved config: experiment id, parameter overrides and output path."""

    id: str
    overrides: dict = field(default_factory=dict)
    directory: Path = Path(DEFAULT_ROOT)


def _locations(text: str) -> dict[tuple[str, str], tuple[int, int]]:
    """``(section, key) -> (line, column of the value)``, both 1-based."""
    found, section = {}, None
    for lineno, line in enumerate(text.splitlines(), 1):
        m = _SECTION_LINE.match(line)
        if m:
            section = m.group(1).strip()
            continue
        m = _KEY_LINE.match(line)
        if m and section is not None and not line.lstrip().startswith(("#", ";")):
            found[(section, m.group(1).strip().lower())] = (lineno, m.end() + 1)
    return found


def _convert(raw: str, default):
    """Parse ``raw`` to the type of ``default``."""
    if isinstance(default, bool):
        lowered = raw.strip().lower()
        if lowered not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
            raise ValueError(f"expected a boolean, got {raw!r}")
        return lowered in ("true", "yes", "1", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, (tuple, list)):
        kind = type(default[0]) if default else float
        items = tuple(kind(part) for part in raw.split(",") if part.strip())
        if not items:
            raise ValueError("expected a comma-separated list")
        if kind is float and len(items) > 1:
            _check_geometric(items)
        return items
    return raw.strip()


def _check_geometric(values: tuple) -> None:
    if any(not v > 0 or not math.isfinite(v) for v in values):
        raise ValueError("ladder entries must be positive")
    ratios = np.array(values[1:]) / np.array(values[:-1])
    if not np.allclose(ratios, ratios[0], rtol=1e-9):
        raise ValueError("ladders must be geometric")


def parse_config(text: str, root: str | Path | None = None) -> ExperimentConfig:
    """Resolve an INI config against the experiment registry."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("missing section header", exc.lineno, 1) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(exc.message.splitlines()[0], exc.lineno, 1) from None
    except configparser.ParsingError as exc:
        lineno, _ = exc.errors[0]
        raise ConfigError("malformed line", lineno, 1) from None
    where = _locations(text)

    def fail(message: str, section: str, key: str | None = None):
        line, column = where.get((section, key), (None, None)) if key else (None, None)
        raise ConfigError(message, line, column)

    if not parser.has_section("experiment"):
        raise ConfigError("missing [experiment] section", 1, 1)
    exp = parser["experiment"]
    if "id" not in exp:
        fail("missing experiment id", "experiment")
    eid = exp["id"].strip()
    if eid not in REGISTRY:
        fail(f"unknown experiment id {eid!r}", "experiment", "id")
    defaults = REGISTRY[eid].defaults
    overrides = {}
    for key, raw in exp.items():
        if key == "id":
            continue
        if key not in defaults:
            fail(f"experiment {eid!r} has no parameter {key!r}", "experiment", key)
        try:
            value = _convert(raw, defaults[key])
        except ValueError as exc:
            fail(f"bad value for {key!r}: {exc}", "experiment", key)
        if key == "hamiltonian" and value not in CATALOG:
            fail(f"unknown hamiltonian id {value!r}", "experiment", key)
        overrides[key] = value
    for section in parser.sections():
        if section not in ("experiment", "output"):
            raise ConfigError(f"unknown section [{section}]",
                              *_section_line(text, section))
    directory = Path(eid)
    if parser.has_section("output"):
        out = parser["output"]
        for key in out:
            if key != "directory":
                fail(f"unknown output key {key!r}", "output", key)
        directory = Path(out.get("directory", eid).strip())
    if not directory.is_absolute():
        base = root if root is not None else os.environ.get(OUTPUT_ROOT_ENV, DEFAULT_ROOT)
        directory = Path(base) / directory
    return ExperimentConfig(eid, overrides, directory)


def _section_line(text: str, section: str) -> tuple[int, int]:
    for lineno, line in enumerate(text.splitlines(), 1):
        m = _SECTION_LINE.match(line)
        if m and m.group(1).strip() == section:
            return lineno, 1
    return 1, 1


def load_config(target: str) -> ExperimentConfig:
    path = Path(target)
    if path.is_file():
        return parse_config(path.read_text())
    if target in REGISTRY:
        return parse_config(f"[experiment]\nid = {target}\n")
    raise ConfigError(f"no config file or experiment named {target!r}")


def _failing_module(exc: BaseException) -> str:
    frames = traceback.extract_tb(exc.__traceback__)
    for frame in reversed(frames):
        path = Path(frame.filename)
        if path.parent.name == "hjlab":
            return path.stem
    return type(exc).__module__


def run_experiment(target: str, out=None, err=None) -> int:
    """Run the experiment a config describes and write its reports; returns the exit status."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        cfg = load_config(target)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG
    try:
        result = REGISTRY[cfg.id].run(cfg.overrides)
    except (HJLabError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure in {_failing_module(exc)}: {type(exc).__name__}: {exc}",
              file=err)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: invalid parameter for {cfg.id}: {exc}", file=err)
        return EXIT_CONFIG
    result.write(cfg.directory)
    for name, ok in result.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {cfg.id} {name}", file=out)
    for r in result.rates:
        print(f"     {r.norm.key} {r.component}: fitted order {r.fitted_order:.4f} "
              f"(expected {r.expected_order} +/- {r.tolerance})", file=out)
    print(f"{'PASS' if result.passed else 'FAIL'} {cfg.id}: reports in {cfg.directory}", file=out)
    return EXIT_PASS if result.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hjlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a config file or a registered id")
    run.add_argument("config")
    sub.add_parser("list", help="list registered experiments")
    desc = sub.add_parser("describe", help="show an experiment and its parameters")
    desc.add_argument("id")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_PASS
    if args.command == "list":
        for eid, anchor in list_experiments():
            print(f"{eid}\t{anchor}")
        return EXIT_PASS
    if args.command == "describe":
        if args.id not in REGISTRY:
            print(f"unknown experiment id {args.id!r}", file=sys.stderr)
            return EXIT_CONFIG
        print(describe(args.id))
        return EXIT_PASS
    return run_experiment(args.config)


if __name__ == "__main__":
    sys.exit(main())
