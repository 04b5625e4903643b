"""Command line front end: ``sectoria <command> --spec job.json``.

A job file is a JSON object.  Fields used by the commands:

``operator``
    an operator object ``{"m", "N", "A", "disc_radius"}`` or a path to one.
``region``
    ``{"bands": [...]}`` (or a path to such a file) for ``cover``,
    ``solve`` and ``experiment``.
``rhs``
    list of expression strings in ``z``, one per component.
``h``, ``chart``, ``sector``
    the function, chart and sector for ``check-pullback``.
``trials``, ``trial_degree``
    number and degree of random polynomial right-hand sides for
    ``experiment``.
``output``, ``seed``, ``tolerances``
    output directory, random seed and tolerance overrides.

Exit status: 0 solved or consistent, 1 parse error, 2 partial,
3 unsupported case or violated hypothesis, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import Band, Chart, CoverError, Sector
from .holofn import Expr
from .honda import ConditioningError, PathError, amplitude_bound
from .puiseux import ParseError, format_puiseux
from .quadrature import IntegrationError
from .solver import SCHEMA, Tolerances, cover_and_solve, cover_for, h1_comparison_experiment, polynomial_trials
from .tempered import HypothesisError, pullback_temperedness_check
from .turrittin import OperatorSpec, UnsupportedCase, exponential_parts, formal_fundamental

log = logging.getLogger("sectoria")

COMMANDS = ("analyze", "cover", "solve", "check-pullback", "experiment")

EXIT_OK, EXIT_PARSE, EXIT_PARTIAL, EXIT_UNSUPPORTED, EXIT_NUMERIC = 0, 1, 2, 3, 4


class JobError(ValueError):
    """The job file is well-formed JSON but misses or misuses a field."""


def _default(o):
    if isinstance(o, np.generic):
        return o.item() if not np.iscomplexobj(o) else [o.real.item(), o.imag.item()]
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_default, allow_nan=False) + "\n"


def _load_json_text(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: {exc.msg}", text, exc.pos) from exc


def _resolve(value, base: Path, what: str):
    """Inline JSON objects pass through; strings are paths relative to the job file."""
    if isinstance(value, str):
        path = (base / value).resolve()
        if not path.exists():
            raise JobError(f"{what} file not found: {value}")
        return _load_json_text(path.read_text(), str(path))
    return value


def _need(job: dict, key: str, command: str):
    if key not in job:
        raise JobError(f"command {command!r} needs the field {key!r}")
    return job[key]


def _bands(job, base, command):
    reg = _resolve(_need(job, "region", command), base, "region")
    if isinstance(reg, dict) and "bands" in reg:
        reg = reg["bands"]
    if not isinstance(reg, list) or not reg:
        raise JobError("region must hold a non-empty list of bands")
    return [Band.from_json(b) for b in reg]


def _rhs(job, m):
    g = job.get("rhs", ["0"] * m)
    if isinstance(g, str):
        g = [g]
    if len(g) != m:
        raise JobError(f"rhs has {len(g)} components, operator has m = {m}")
    return [Expr(str(x)) for x in g]


def _analyze(op: OperatorSpec, tol: Tolerances) -> dict:
    ep = exponential_parts(op)
    ff = formal_fundamental(op, ep, tol.order)
    return {
        "schema": SCHEMA,
        "operator": op.to_json(),
        "l": ep.l,
        "Lambda": [format_puiseux(p) for p in ep.lambdas],
        "amplitude_bounds": [amplitude_bound(p).to_json() for p in ep.lambdas],
        "fundamental": ff.to_json(),
    }


def run(job: dict, base: Path, out: Path, seed: int) -> int:
    command = _need(job, "command", "?")
    if command not in COMMANDS:
        raise JobError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    tol = Tolerances().updated(job.get("tolerances"))
    out.mkdir(parents=True, exist_ok=True)

    if command == "check-pullback":
        h = Expr(str(_need(job, "h", command)))
        chart = Chart.from_json(_resolve(_need(job, "chart", command), base, "chart"))
        sector = Sector.from_json(_resolve(_need(job, "sector", command), base, "sector"))
        rep = pullback_temperedness_check(h, chart, sector, per_stratum=int(job.get("per_stratum", 256)), seed=seed)
        doc = {"schema": SCHEMA, "seed": seed, "h": h.label, "chart": chart.to_json(), "sector": sector.to_json(), **rep.to_json()}
        (out / "pullback.json").write_text(dumps(doc))
        return {"consistent": EXIT_OK, "inconsistent": EXIT_NUMERIC}.get(rep.verdict, EXIT_PARTIAL)

    op = OperatorSpec.from_json(_resolve(_need(job, "operator", command), base, "operator"))

    if command == "analyze":
        doc = _analyze(op, tol)
        doc["seed"] = seed
        (out / "analysis.json").write_text(dumps(doc))
        return EXIT_OK

    bands = _bands(job, base, command)

    if command == "cover":
        ep = exponential_parts(op)
        covers, pieces = cover_for(op, ep, bands, tol, seed)
        doc = {
            "schema": SCHEMA,
            "seed": seed,
            "operator": op.to_json(),
            "bands": [b.to_json() for b in bands],
            "covers": covers,
            "pieces": [{"id": p.id, "band": p.band, "kind": p.kind, "region": p.region.to_json()} for p in pieces],
        }
        (out / "cover.json").write_text(dumps(doc))
        ok = all(c["agreement"]["agreement"] >= tol.membership for c in covers)
        return EXIT_OK if ok else EXIT_PARTIAL

    if command == "solve":
        rep = cover_and_solve(op, bands, _rhs(job, op.m), tol, seed)
        (out / "report.json").write_text(dumps(rep.to_json()))
        (out / "pieces.csv").write_text(rep.pieces_csv())
        if rep.pieces and any(p.solution is not None for p in rep.pieces):
            (out / "samples.csv").write_text(rep.samples_csv())
        if rep.error and rep.error.startswith("unsupported"):
            return EXIT_UNSUPPORTED
        return {"solved": EXIT_OK, "partial": EXIT_PARTIAL}.get(rep.verdict, EXIT_NUMERIC)

    # experiment
    n = int(job.get("trials", 10))
    trials = polynomial_trials(op.m, n, seed, int(job.get("trial_degree", 3)))
    extra = [[Expr(str(x)) for x in g] for g in job.get("extra_rhs", [])]
    doc = h1_comparison_experiment(op, bands, trials + extra, tol, seed)
    (out / "experiment.json").write_text(dumps(doc))
    if "error" in doc:
        return EXIT_UNSUPPORTED
    frac = doc["success_fraction"]
    return EXIT_OK if frac == 1.0 else (EXIT_PARTIAL if frac else EXIT_NUMERIC)


class _Parser(argparse.ArgumentParser):
    # usage mistakes are parse errors; argparse's own status 2 means "partial" here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sectoria", description="Tempered solutions of linear ODE at an irregular singular point.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--spec", required=True, type=Path, help="job file (JSON)")
    ap.add_argument("--out", type=Path, help="output directory (default: the job's 'output' field or '.')")
    ap.add_argument("--seed", type=int, help="random seed (overrides the job's 'seed' field)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if not args.spec.exists():
            raise JobError(f"job file not found: {args.spec}")
        job = _load_json_text(args.spec.read_text(), str(args.spec))
        if not isinstance(job, dict):
            raise JobError("job file must hold a JSON object")
        job = {**job, "command": args.command}
        seed = args.seed if args.seed is not None else int(job.get("seed", 0))
        out = args.out or Path(job.get("output", "."))
        return run(job, args.spec.parent, out, seed)
    except ParseError as exc:
        print(f"sectoria: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (JobError, KeyError, TypeError) as exc:
        print(f"sectoria: invalid job: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (UnsupportedCase, HypothesisError, PathError, CoverError) as exc:
        print(f"sectoria: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (IntegrationError, ConditioningError, ArithmeticError) as exc:
        print(f"sectoria: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"sectoria: invalid input: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
