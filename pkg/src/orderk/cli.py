"""``orderk`` command line: exact pmfs, simulation, hitting reports, verification.

Every option can also be set through an environment variable named
``ORDERK_`` plus the option name in upper case (``--max-n`` becomes
``ORDERK_MAX_N``).  Explicit options win over the environment.

With ``--out DIR`` a command writes ``report.json``, data files such as
``histogram.csv``, and ``manifest.json``.  The manifest holds every resolved
parameter and the checksums of the other files; ``orderk replay`` reruns it.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from . import __version__
from .core import OrderParams, ParameterError, WeightTable, validate_params
from .exactdist import (
    iterated_u_tail_bound,
    pmf_table_u,
    pmf_table_weighted,
    weighted_tail_bound,
)
from .hitting import HitQuery, hit_report
from .simulate import (
    COMPOUND,
    MODES,
    SimConfig,
    concat_batches,
    map_streams,
    simulate_u,
    simulate_w,
    simulate_z,
)
from .subordinators import BernsteinFn, DerivativeUnavailableError
from .verification import SUITES, run_suites

SCHEMA_VERSION = 1
ENV_PREFIX = "ORDERK_"

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INVALID = 2
EXIT_UNSUPPORTED = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID) -> None:
        super().__init__(message)
        self.code = code


# -- output helpers -----------------------------------------------------------


def _plain(value):
    """Convert numpy scalars and tuples into JSON-ready builtins."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps_json(obj) -> str:
    # float repr is the shortest string that parses back to the same double
    return json.dumps(_plain(obj), indent=2, sort_keys=False, allow_nan=True) + "\n"


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dumps_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0])
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(_plain(row[h])) for h in header])
    return buf.getvalue()


def _format_table(rows: list[dict]) -> str:
    if not rows:
        return ""
    header = list(rows[0])
    cells = [[_csv_cell(_plain(r[h])) for h in header] for r in rows]
    widths = [max(len(h), *(len(c[j]) for c in cells)) for j, h in enumerate(header)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


class Result:
    """What a command produced: a JSON report plus optional tabular files."""

    def __init__(self, report: dict, rows: list[dict], files: dict[str, str] | None = None,
                 summary: str = "", exit_code: int = EXIT_OK, extra_manifest: dict | None = None):
        self.report = {"schema_version": SCHEMA_VERSION, **report}
        self.rows = rows
        self.files = files or {}
        self.summary = summary
        self.exit_code = exit_code
        self.extra_manifest = extra_manifest or {}


# -- argument handling ----------------------------------------------------------


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _add_common(sp: argparse.ArgumentParser, processes: Sequence[str]) -> None:
    sp.add_argument("--process", type=str.lower, choices=processes, default=processes[0])
    sp.add_argument("--i", type=int, default=None, help="order i (defaults to len(g) for z, else 1)")
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--g", type=str, default=None, help="weight table, e.g. 2,4")
    sp.add_argument("--f", type=str, default=None, help="Bernstein function, e.g. stable:0.5")
    sp.add_argument("--beta", type=float, default=None)


def _add_output(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--format", choices=("table", "json", "csv"), default="table")
    sp.add_argument("--out", type=str, default=None, help="directory for report and manifest")


def _add_mc(sp: argparse.ArgumentParser, paths: int) -> None:
    sp.add_argument("--paths", type=_positive_int, default=paths)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--streams", type=_positive_int, default=1)
    sp.add_argument("--workers", type=_positive_int, default=None,
                    help="threads; results do not depend on it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orderk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"orderk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("pmf", help="exact pmf table with certified tail bounds")
    _add_common(sp, ("y", "z", "u"))
    sp.add_argument("--max-n", type=int, default=None)
    sp.add_argument("--tail-tol", type=float, default=1e-9)
    _add_output(sp)

    sp = sub.add_parser("simulate", help="terminal-value histogram from Monte Carlo paths")
    _add_common(sp, ("y", "z", "w", "u"))
    sp.add_argument("--mode", choices=MODES, default=COMPOUND)
    _add_mc(sp, 100_000)
    sp.add_argument("--dump-paths", type=int, default=0, help="write the first N paths")
    _add_output(sp)

    sp = sub.add_parser("hit", help="hitting probability: closed form, oracle and Monte Carlo")
    _add_common(sp, ("y", "z", "w", "u"))
    sp.add_argument("--k", type=_positive_int, required=False, default=None)
    _add_mc(sp, 100_000)
    _add_output(sp)

    sp = sub.add_parser("verify", help="run verification suites")
    sp.add_argument("--suite", choices=SUITES + ("all",), action="append", default=None)
    sp.add_argument("--seed", type=int, default=0)
    _add_output(sp)

    sp = sub.add_parser("replay", help="rerun a manifest and compare output checksums")
    sp.add_argument("manifest", type=str)
    sp.add_argument("--out", type=str, default=None)
    sp.add_argument("--format", choices=("table", "json", "csv"), default="table")
    return parser


def _apply_env(parser: argparse.ArgumentParser, environ) -> None:
    """Turn ``ORDERK_*`` variables into option defaults."""
    subparsers = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    for group in subparsers:
        for sp in group.choices.values():
            for action in sp._actions:
                longs = [s for s in action.option_strings if s.startswith("--")]
                if not longs or action.dest == "help":
                    continue
                key = ENV_PREFIX + longs[0][2:].replace("-", "_").upper()
                if key not in environ:
                    continue
                raw = environ[key]
                try:
                    value = action.type(raw) if action.type else raw
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise CliError(f"{key}={raw!r}: {exc}") from exc
                if action.choices is not None and value not in action.choices:
                    raise CliError(f"{key}={raw!r}: expected one of {list(action.choices)}")
                if isinstance(action, argparse._AppendAction):
                    value = [value]
                action.default = value


def _process_args(ns: argparse.Namespace, beta_default: float | None = None
                  ) -> tuple[OrderParams, WeightTable | None, BernsteinFn | None, float | None]:
    proc = ns.process
    if ns.beta is None:
        ns.beta = beta_default
    g = WeightTable.parse(ns.g) if ns.g else None
    if proc == "z" and g is None:
        raise ParameterError("process z needs --g")
    i = ns.i if ns.i is not None else (len(g) if proc == "z" else 1)
    if g is not None and len(g) != i:
        raise ParameterError(f"--g has {len(g)} entries but --i is {i}")
    p = validate_params(OrderParams(i, ns.lam, ns.t))
    f = BernsteinFn.parse(ns.f) if ns.f else None
    if proc == "w" and f is None:
        raise ParameterError("process w needs --f")
    if proc == "u" and (ns.beta is None or not ns.beta > 0):
        raise ParameterError("process u needs a positive --beta")
    return p, g, f, ns.beta


# -- commands ----------------------------------------------------------------


def cmd_pmf(ns: argparse.Namespace) -> Result:
    p, g, _, beta = _process_args(ns)
    if ns.max_n is not None and ns.max_n < 0:
        raise ParameterError("--max-n must be nonnegative")
    if ns.process == "u":
        table = pmf_table_u(p, beta, ns.max_n, ns.tail_tol)
        tail = lambda n: iterated_u_tail_bound(p, beta, n)  # noqa: E731
    else:
        g = g or WeightTable.identity(p.i)
        table = pmf_table_weighted(p, g, ns.max_n, ns.tail_tol)
        tail = lambda n: weighted_tail_bound(p, g, n)  # noqa: E731
    cdf = table.cdf()
    rows = [
        {"n": n, "pmf": float(table.probs[n]), "cdf": float(cdf[n]),
         "tail_bound": min(1.0, float(tail(n)))}
        for n in range(table.n_max + 1)
    ]
    report = {
        "command": "pmf",
        "process": ns.process,
        "params": {"i": p.i, "lambda": p.lam, "t": p.t,
                   "g": list(g.weights) if g else None, "beta": beta},
        "n_max": table.n_max,
        "total_mass": table.total_mass(),
        "table_tail_bound": table.tail_bound,
        "rows": rows,
    }
    return Result(report, rows, {"histogram.csv": dumps_csv(rows)})


def _draw_batch(ns, p, g, f, beta, times):
    proc, mode = ns.process, ns.mode

    def draw(n, rng):
        if proc in ("y", "z"):
            return simulate_z(p, g or WeightTable.identity(p.i), n, rng, mode, times)
        if proc == "w":
            return simulate_w(p, f, n, rng, mode, times)
        return simulate_u(p, beta, n, rng, mode, times)

    return draw


def _exact_mean(proc, p, g, beta) -> float | None:
    if proc in ("y", "z"):
        return p.lam * p.t * sum((g or WeightTable.identity(p.i)).weights)
    if proc == "u":
        return beta * p.t * p.lam * p.i * (p.i + 1) / 2
    return None


def cmd_simulate(ns: argparse.Namespace) -> Result:
    p, g, f, beta = _process_args(ns)
    if ns.dump_paths < 0:
        raise ParameterError("--dump-paths must be nonnegative")
    cfg = SimConfig(ns.paths, ns.seed, ns.streams, ns.workers)
    times = ns.dump_paths > 0
    batch = concat_batches(map_streams(_draw_batch(ns, p, g, f, beta, times), cfg))
    values, counts = np.unique(batch.terminal, return_counts=True)
    rows = [{"value": int(v), "count": int(c), "frequency": c / cfg.n_paths}
            for v, c in zip(values, counts)]
    term = batch.terminal.astype(np.float64)
    mean = float(term.mean())
    var = float(term.var(ddof=1)) if cfg.n_paths > 1 else 0.0
    report = {
        "command": "simulate",
        "process": ns.process,
        "mode": ns.mode,
        "params": {"i": p.i, "lambda": p.lam, "t": p.t, "g": list(g.weights) if g else None,
                   "f": str(f) if f else None, "beta": beta},
        "n_paths": cfg.n_paths,
        "seed": cfg.seed,
        "n_streams": cfg.n_streams,
        "mean": mean,
        "mean_se": math.sqrt(var / cfg.n_paths),
        "variance": var,
        "exact_mean": _exact_mean(ns.process, p, g, beta),
        "zero_frequency": float(np.mean(batch.terminal == 0)),
        "histogram": rows,
    }
    files = {"histogram.csv": dumps_csv(rows)}
    if times:
        dump = []
        for k in range(min(ns.dump_paths, len(batch))):
            path = batch.path(k)
            dump += [{"path": k, "event_time": float(s), "increment": int(x)}
                     for s, x in zip(path.event_times, path.increments)]
        files["paths.csv"] = dumps_csv(dump) or "path,event_time,increment\n"
    return Result(report, rows, files)


def cmd_hit(ns: argparse.Namespace) -> Result:
    # the clock rate of U changes when levels are reached, not whether
    p, g, f, beta = _process_args(ns, beta_default=1.0 if ns.process == "u" else None)
    if ns.k is None:
        raise ParameterError("hit needs --k")
    query = HitQuery(ns.process.upper(), p, ns.k, weights=g, bernstein=f, beta=beta)
    cfg = SimConfig(ns.paths, ns.seed, ns.streams, ns.workers)
    rep = hit_report(query, cfg)
    report = {"command": "hit", "seed": cfg.seed, "n_streams": cfg.n_streams, **rep.to_dict()}
    row = {
        "process": query.process, "k": query.k, "paper_value": rep.paper_value,
        "oracle_value": rep.oracle_value, "mc_estimate": rep.mc_estimate,
        "mc_halfwidth_95": rep.mc_halfwidth_95, "n_paths": rep.n_paths,
        "paper_oracle": rep.paper_oracle_agree, "oracle_mc": rep.oracle_mc_agree,
    }
    return Result(report, [row])


def cmd_verify(ns: argparse.Namespace) -> Result:
    suites = ns.suite or ["all"]
    results, timings = run_suites(suites, ns.seed)
    checks = [r.to_dict() for r in results]
    failed = [r for r in results if not r.passed]
    report = {
        "command": "verify",
        "suites": suites,
        "seed": ns.seed,
        "passed": not failed,
        "n_checks": len(results),
        "n_failed": len(failed),
        "checks": checks,
    }
    rows = [{"suite": r.suite, "name": r.name, "kind": r.kind,
             "status": "pass" if r.passed else "FAIL", "value": r.value,
             "reference": r.reference, "tolerance": r.tolerance, "detail": r.detail}
            for r in results]
    summary = f"{len(results) - len(failed)}/{len(results)} checks passed\n"
    return Result(report, rows, summary=summary,
                  exit_code=EXIT_OK if not failed else EXIT_VERIFY_FAILED,
                  extra_manifest={"timings_s": timings})


COMMANDS = {"pmf": cmd_pmf, "simulate": cmd_simulate, "hit": cmd_hit, "verify": cmd_verify}
# Options that only affect presentation or where files go.
NON_DATA_OPTIONS = ("command", "format", "out")


# -- files and manifests -----------------------------------------------------------


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_outputs(out: Path, ns: argparse.Namespace, result: Result) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    files = {"report.json": dumps_json(result.report), **result.files}
    for name, text in files.items():
        (out / name).write_text(text)
    params = {k: v for k, v in vars(ns).items() if k not in NON_DATA_OPTIONS}
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool": "orderk",
        "version": __version__,
        "command": ns.command,
        "parameters": params,
        "seed": params.get("seed"),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "outputs": {name: {"sha256": _sha256(text)} for name, text in files.items()},
        **result.extra_manifest,
    }
    (out / "manifest.json").write_text(dumps_json(manifest))
    return manifest


def _emit(ns: argparse.Namespace, result: Result, stream) -> None:
    if ns.format == "json":
        stream.write(dumps_json(result.report))
    elif ns.format == "csv":
        stream.write(dumps_csv(result.rows))
    else:
        stream.write(_format_table(result.rows))
        stream.write(result.summary)


def _run_command(ns: argparse.Namespace) -> Result:
    return COMMANDS[ns.command](ns)


def cmd_replay(ns: argparse.Namespace, parser: argparse.ArgumentParser, stream) -> int:
    try:
        manifest = json.loads(Path(ns.manifest).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read manifest {ns.manifest}: {exc}") from exc
    if manifest.get("schema_version") != SCHEMA_VERSION or manifest.get("command") not in COMMANDS:
        raise CliError("unsupported manifest")
    rerun = parser.parse_args([manifest["command"]])
    for key, value in manifest["parameters"].items():
        setattr(rerun, key, value)
    out = Path(ns.out) if ns.out else Path(tempfile.mkdtemp(prefix="orderk-replay-"))
    rerun.out = str(out)
    result = _run_command(rerun)
    fresh = write_outputs(out, rerun, result)
    rows = []
    for name, entry in manifest["outputs"].items():
        got = fresh["outputs"].get(name, {}).get("sha256")
        rows.append({"file": name, "expected": entry["sha256"], "replayed": got,
                     "identical": got == entry["sha256"]})
    same = all(r["identical"] for r in rows)
    if ns.format == "json":
        stream.write(dumps_json({"schema_version": SCHEMA_VERSION, "command": "replay",
                                 "out": str(out), "identical": same, "files": rows}))
    elif ns.format == "csv":
        stream.write(dumps_csv(rows))
    else:
        stream.write(_format_table(rows))
        stream.write(f"replay in {out}: {'identical' if same else 'DIFFERENT'}\n")
    return EXIT_OK if same else EXIT_VERIFY_FAILED


def main(argv: Sequence[str] | None = None, environ=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        _apply_env(parser, os.environ if environ is None else environ)
        try:
            ns = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        if ns.command == "replay":
            return cmd_replay(ns, parser, stdout)
        result = _run_command(ns)
    except CliError as exc:
        print(f"orderk: error: {exc}", file=sys.stderr)
        return exc.code
    except DerivativeUnavailableError as exc:
        print(f"orderk: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (ParameterError, ValueError) as exc:
        print(f"orderk: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if ns.out:
        write_outputs(Path(ns.out), ns, result)
    _emit(ns, result, stdout)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
