"""Command-line front end.

Usage::

    dissonance <scenario> [--config FILE] [--out FILE] [--seed N] [--<param> VALUE ...]
    dissonance measure STATE_FILE [--out FILE] [--seed N] [--<anneal param> VALUE ...]

Parameters resolve as built-in defaults, then the config file, then
command-line flags.  Exit status is 0 on success, 1 for usage or I/O
problems and 2 when an input fails validation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .anneal import annealed_report
from .correlations import CorrelationReport, discord_2q
from .exceptions import DissonanceError, ParseError
from .qmath import DensityMatrix
from .scenarios import SCENARIO_DEFAULTS, ScenarioConfig, Table, anneal_config, run_scenario

EXIT_OK, EXIT_USAGE, EXIT_INVALID = 0, 1, 2
CONFIG_KEYS = {"scenario", "parameters", "out", "seed"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x) + 0.0:.9g}"  # folds -0 into 0
    return str(x)


def _csv_text(header: list[str], rows, meta: list[tuple[str, str]]) -> str:
    buf = io.StringIO()
    for k, v in meta:
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


def table_csv(table: Table, cfg: ScenarioConfig) -> str:
    meta = [("tool", f"dissonance {__version__}"), ("scenario", cfg.scenario), ("seed", str(cfg.seed)),
            ("parameters", cfg.describe())]
    meta += list(table.metadata.items())
    return _csv_text(table.columns, table.rows, meta)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", newline="", encoding="utf-8") as f:
        f.write(text)


# --- state files ------------------------------------------------------------


def _parse_entry(x, where: str) -> complex:
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in x
    ):
        return complex(x[0], x[1])
    raise ParseError(f"{where}: expected a [re, im] pair of numbers, got {json.dumps(x)}")


def parse_state(text: str, source: str = "<state>") -> DensityMatrix:
    """Parse ``{"dims": [...], "matrix": [[re, im], ...]}`` into a density matrix.

    ``matrix`` is row-major, either flat (``n*n`` pairs) or nested as rows.
    Malformed content raises :class:`ParseError`; a well-formed matrix that
    is not a valid state raises the validation error of
    :class:`DensityMatrix`.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{source}: top level must be a JSON object")
    extra = sorted(set(doc) - {"dims", "matrix"})
    if extra:
        raise ParseError(f"{source}: unknown field(s) {', '.join(extra)}")
    for key in ("dims", "matrix"):
        if key not in doc:
            raise ParseError(f"{source}: missing field '{key}'")
    dims = doc["dims"]
    if not isinstance(dims, list) or not dims or not all(isinstance(d, int) and not isinstance(d, bool) and d > 0
                                                         for d in dims):
        raise ParseError(f"{source}: field 'dims' must be a non-empty list of positive integers")
    n = int(np.prod(dims))
    m = doc["matrix"]
    if not isinstance(m, list):
        raise ParseError(f"{source}: field 'matrix' must be a list")
    if len(m) == n and n > 0 and all(isinstance(r, list) and len(r) == n and all(isinstance(e, list) for e in r)
                                     for r in m):
        vals = [_parse_entry(e, f"{source}: matrix[{i}][{j}]") for i, r in enumerate(m) for j, e in enumerate(r)]
    else:
        if len(m) != n * n:
            raise ParseError(f"{source}: field 'matrix' has {len(m)} entries, dims {dims} need {n * n}")
        vals = [_parse_entry(e, f"{source}: matrix[{k}]") for k, e in enumerate(m)]
    return DensityMatrix(np.array(vals, dtype=complex).reshape(n, n), tuple(dims))


def state_json(rho: DensityMatrix) -> str:
    """Inverse of :func:`parse_state` (flat layout)."""
    flat = [[float(z.real), float(z.imag)] for z in rho.matrix.ravel()]
    return json.dumps({"dims": list(rho.dims), "matrix": flat})


def measure(rho: DensityMatrix, params: dict | None = None, seed: int = 0) -> CorrelationReport:
    if rho.dims == (2, 2):
        return discord_2q(rho)
    if rho.dims == (3, 3):
        p = {**SCENARIO_DEFAULTS["measure"], **(params or {})}
        return annealed_report(rho, anneal_config(p, seed), eof=True)
    raise ParseError(f"dims {list(rho.dims)} not supported; expected [2, 2] or [3, 3]")


def report_lines(rep: CorrelationReport, dims) -> list[tuple[str, str]]:
    kind = "concurrence" if tuple(dims) == (2, 2) else "eof"
    d = rep.as_dict()
    return [
        ("mutual_information", fmt(d["mutual_information"])),
        ("classical", fmt(d["classical"])),
        ("discord", fmt(d["discord"])),
        (f"entanglement_{kind}", fmt(d["entanglement"])),
        ("optimal_measurement", d["optimal_measurement"]),
        ("symmetric", fmt(d["symmetric"])),
    ]


# --- argument handling --------------------------------------------------------


def _cast(key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float) or default is None:
            return float(raw)
    except ValueError:
        raise UsageError(f"--{key}: cannot parse {raw!r} as {type(default).__name__}") from None
    return raw


def _param_flags(rest: list[str], scenario: str) -> dict:
    defaults = SCENARIO_DEFAULTS[scenario]
    out = {}
    i = 0
    while i < len(rest):
        tok = rest[i]
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        key, _, val = tok[2:].partition("=")
        key = key.replace("-", "_")
        if key not in defaults or key == "state":
            raise UsageError(f"unknown parameter --{key} for {scenario}; known: {', '.join(sorted(defaults))}")
        if not _:
            if i + 1 >= len(rest):
                raise UsageError(f"--{key} needs a value")
            val = rest[i + 1]
            i += 1
        out[key] = _cast(key, val, defaults[key])
        i += 1
    return out


def load_config(path: str) -> dict:
    """Read a JSON scenario file; unknown keys are rejected."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise OSError(f"cannot read config {path}: {e.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    extra = sorted(set(doc) - CONFIG_KEYS)
    if extra:
        raise ParseError(f"{path}: unknown key(s) {', '.join(extra)}")
    if "parameters" in doc and not isinstance(doc["parameters"], dict):
        raise ParseError(f"{path}: 'parameters' must be an object")
    return doc


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dissonance", description="Generate and quantify maximally dissonant states.")
    p.add_argument("scenario", help="one of: " + ", ".join(SCENARIO_DEFAULTS))
    p.add_argument("state", nargs="?", help="state file (measure only)")
    p.add_argument("--config", help="JSON file with scenario, parameters, out, seed")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--seed", type=int, help="anneal seed (default 0)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _resolve(argv) -> tuple[ScenarioConfig, str | None]:
    args, rest = build_parser().parse_known_args(argv)
    doc = load_config(args.config) if args.config else {}
    scenario = args.scenario
    if doc.get("scenario", scenario) != scenario:
        raise UsageError(f"config is for {doc['scenario']!r}, command line asks for {scenario!r}")
    if scenario not in SCENARIO_DEFAULTS:
        raise UsageError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIO_DEFAULTS)}")
    if args.state is not None and scenario != "measure":
        raise UsageError(f"unexpected argument {args.state!r}")
    params = dict(doc.get("parameters", {}))
    unknown = sorted(set(params) - set(SCENARIO_DEFAULTS[scenario]))
    if unknown:
        raise ParseError(f"{args.config}: unknown parameter(s) for {scenario}: {', '.join(unknown)}")
    params.update(_param_flags(rest, scenario))
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    out = args.out if args.out is not None else doc.get("out")
    state = args.state or params.pop("state", "") or None
    if scenario == "measure" and not state:
        raise UsageError("measure needs a state file")
    return ScenarioConfig(scenario, params, out, seed), state


def main(argv=None) -> int:
    try:
        cfg, state = _resolve(sys.argv[1:] if argv is None else argv)
        if cfg.scenario == "measure":
            try:
                text = Path(state).read_text(encoding="utf-8")
            except OSError as e:
                raise OSError(f"cannot read state file {state}: {e.strerror}") from None
            rho = parse_state(text, state)
            rep = measure(rho, {k: v for k, v in cfg.parameters.items() if k != "state"}, cfg.seed)
            lines = report_lines(rep, rho.dims)
            for k, v in lines:
                print(f"{k}: {v}")
            if cfg.out:
                _emit(_csv_text([k for k, _ in lines], [[v for _, v in lines]], [("seed", str(cfg.seed))]), cfg.out)
            return EXIT_OK
        text = table_csv(run_scenario(cfg), cfg)
        _emit(text, cfg.out)
        return EXIT_OK
    except UsageError as e:
        print(f"dissonance: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"dissonance: I/O error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DissonanceError, ValueError) as e:
        print(f"dissonance: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
