"""``oblimit <coeffs|verify|simulate|limit-study> --config FILE [--out DIR]``.

Every command writes its artifacts plus ``summary.json`` into the output
directory and nothing anywhere else.  On failure the process exits with a
nonzero status after writing ``error.json`` there.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import SCHEMA, RunConfig, parse_config
from .constitutive import coefficient_table
from .exceptions import ConfigError, SolverError, StudyError
from .harness import emit_report, initial_state, limit_study, prepare_initial
from .grid import Grid
from .io import write_diagnostics, write_snapshot
from .nondim import limit_groups, physical_groups, verify_assumptions
from .solver import ProblemSetup, auto_dt, diagnostics, integrate

COEFF_COLUMNS = ("p", "theta", "rho", "alpha", "beta", "c_p", "eta")
THREADS_ENV = "OBLIMIT_THREADS"

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _dump(obj) -> str:
    def clean(x):
        if isinstance(x, float) and not math.isfinite(x):
            return None if math.isnan(x) else repr(x)
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        return x

    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


def _write(out: Path, name: str, text: str) -> str:
    (out / name).write_text(text)
    return name


def cmd_coeffs(cfg: RunConfig, out: Path):
    ps, ts = cfg.coefficient_axes()
    rows = coefficient_table(cfg.gibbs_model(), ps, ts)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COEFF_COLUMNS)
    w.writerows([repr(float(x)) for x in row] for row in rows)
    return [_write(out, "coeffs.csv", buf.getvalue())], {"rows": len(rows)}


def cmd_verify(cfg: RunConfig, out: Path):
    checks = verify_assumptions(**cfg.verify_kwargs()).as_dict()
    return [_write(out, "verify.json", _dump(checks))], {}


def _flow_groups(cfg: RunConfig, system: str):
    base = cfg.flow_scales()
    A, B = cfg["nondim"]["A"], cfg["nondim"]["B"]
    if system == "full":
        return physical_groups(A, B, base, band=cfg.band())
    if system == "expansion":
        return replace(limit_groups(base), A=A, B=B)
    return limit_groups(base)


def cmd_simulate(cfg: RunConfig, out: Path):
    s = cfg["solver"]
    system = s["system"]
    grid = Grid(s["nx"], s["ny"], s["lx"])
    setup = ProblemSetup(
        grid, _flow_groups(cfg, system), dt=s["dt"] or auto_dt(grid), t_end=s["t_end"],
        upwind=s["upwind"], sweeps=s["sweeps"], cg_rtol=s["cg_rtol"],
    )
    state = prepare_initial(setup, system, initial_state(grid, s["amplitude"]))
    rows = []
    final = integrate(state, setup, system, callback=lambda k, st: rows.append(diagnostics(st, setup)))
    files = [p.name for p in write_snapshot(final, grid, out)]
    files.append(write_diagnostics(rows, out / "diagnostics.csv").name)
    return files, {"steps": len(rows) - 1, "t": float(final.t), "dt": setup.dt}


def _workers():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def cmd_limit_study(cfg: RunConfig, out: Path):
    study = cfg.study_config()
    try:
        report = limit_study(study, workers=_workers())
    except StudyError as exc:
        # keep what finished next to the error record
        emit_report(exc.report, out)
        raise
    files = [p.name for p in emit_report(report, out)]
    return files, {"slopes": report.slopes, "monotone": report.monotone}


COMMANDS = {
    "coeffs": cmd_coeffs,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "limit-study": cmd_limit_study,
}


def run(command: str, cfg: RunConfig, out: Path | None = None) -> list:
    """Run one command and write ``summary.json``; returns the written file names."""
    out = Path(cfg.out if out is None else out)
    out.mkdir(parents=True, exist_ok=True)
    files, info = COMMANDS[command](cfg, out)
    # where the files went is not part of the result, so reruns elsewhere compare equal
    echoed = {k: v for k, v in cfg.as_dict().items() if k != "cli"}
    summary = {
        "command": command,
        "status": "ok",
        "files": files,
        "result": info,
        "config": echoed,
        "config_text": cfg.text,
    }
    _write(out, "summary.json", _dump(summary))
    return files + ["summary.json"]


def _fail(out: Path, command: str, exc: BaseException, code: int) -> int:
    record = {"command": command, "status": "error", "error": type(exc).__name__, "message": str(exc)}
    step = getattr(exc, "step", None) or getattr(exc.__cause__, "step", None)
    if step is not None:
        record["step"] = step
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write(out, "error.json", _dump(record))
    except OSError as err:
        print(f"oblimit: could not write error.json: {err}", file=sys.stderr)
    print(f"oblimit {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oblimit", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, type=Path, help="INI configuration file")
    ap.add_argument("--out", type=Path, help="output directory (overrides [cli] out)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out
    try:
        cfg = parse_config(args.config.read_text(), out=None if out is None else str(out))
    except (OSError, ConfigError) as exc:
        return _fail(Path(out or SCHEMA["cli"]["out"].default), args.command, exc, EXIT_CONFIG)
    out = Path(cfg.out)
    try:
        run(args.command, cfg, out)
    except ConfigError as exc:
        return _fail(out, args.command, exc, EXIT_CONFIG)
    except (SolverError, StudyError, ValueError, ArithmeticError) as exc:
        return _fail(out, args.command, exc, EXIT_FAILED)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
