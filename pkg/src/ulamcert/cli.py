"""Command-line driver: ``certify mixing|escape --config job.ini``.

The job file is INI with four sections::

    [map]
    mod1 = 2*x + 0.5*x*(1-x)        ; or: linear_mod1 = 23/5
    ; or: branches = one "lo hi : formula" per line
    iterate = 2

    [discretization]
    delta = 2^-13
    hole = 7/16, 9/16               ; escape only

    [certification]
    lambda2_target = 0.5
    n_max = 64
    ly = user                       ; user | computed
    ly_A = 1
    ly_lambda1 = 0.32
    ly_B = 30.6
    lorenz_l = 300                  ; computed LY for unbounded derivative

    [outputs]
    table_steps = 2, 4, 6, 8
    density = yes
    trace = trace.csv               ; optional

Exit status: 0 conclusive, 2 valid but inconclusive, 1 user error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__, _kernels
from .certify import (DecayCertificate, certificate_dict, certify_decay, dumps, escape_rate_bound,
                      invariant_density_with_error, power_table)
from .contraction import estimate_lambda2_escape, estimate_lambda2_mixing
from .dynamics import Hole, build_map, iterate_map, linear_mod1, mod1_map
from .errors import (ConfigError, DomainError, ExpansionTooWeak, NoContraction, NotExpandingError,
                     ParseError, PrecisionError)
from .lasota_yorke import ly_hole, ly_iterate, ly_lorenz, ly_one_step, user_supplied
from .rigor import ROUNDING_MODE
from .rigor.interval import Interval, to_fraction
from .ulam import apply_hole_mask, approx_coefficients, build_ulam

EXIT_OK, EXIT_USER, EXIT_INCONCLUSIVE = 0, 1, 2
SECTIONS = ("map", "discretization", "certification", "outputs")


@dataclass
class JobConfig:
    map_kind: str                   # "mod1", "linear_mod1" or "branches"
    map_spec: object
    iterate: int = 1
    mode: str | None = None
    hole: tuple | None = None       # (lo, hi) as Fractions
    k: int = 8192
    lambda2_target: float = 0.5
    n_max: int = 64
    ly: tuple | None = None         # user-supplied (A, lambda1, B) as strings
    lorenz_l: str | None = None
    table_steps: tuple = (1, 2, 3, 4)
    density: bool = False
    density_path: str | None = None
    trace_path: str | None = None
    digest: str = ""
    overrides: dict = field(default_factory=dict)


@dataclass
class Report:
    doc: dict
    status: int
    tables: list = field(default_factory=list)

    def to_json(self) -> str:
        return dumps(self.doc)


# -- config ---------------------------------------------------------------------

def parse_delta(text) -> int:
    """Number of cells for a delta like ``2^-13`` or ``1/8192``; must be a power of two."""
    try:
        q = to_fraction(str(text).strip())
    except (ValueError, ZeroDivisionError, ParseError) as exc:
        raise ConfigError(f"cannot read delta {text!r}") from exc
    if q <= 0 or q.numerator != 1 or q.denominator & (q.denominator - 1) or q.denominator < 2:
        raise ConfigError(f"delta must be 1/2^j with j >= 1, got {text!r}")
    return q.denominator


def _fraction(text, what):
    try:
        return to_fraction(text.strip())
    except (ValueError, ZeroDivisionError, ParseError) as exc:
        raise ConfigError(f"{what}: cannot read number {text!r}") from exc


def _branches(text: str):
    specs = []
    for n, line in enumerate(text.strip().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if ":" not in line:
            raise ConfigError(f"[map] branches line {n}: expected 'lo hi : formula'")
        dom, formula = line.split(":", 1)
        parts = dom.replace(",", " ").split()
        if len(parts) != 2:
            raise ConfigError(f"[map] branches line {n}: expected two endpoints")
        specs.append(((parts[0], parts[1]), formula.strip()))
    return specs


def load_config(text: str, overrides: dict | None = None) -> JobConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from exc
    unknown = [s for s in cp.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"unknown section [{unknown[0]}]")
    if not cp.has_section("map"):
        raise ConfigError("missing [map] section")
    m = cp["map"]
    kinds = [key for key in ("mod1", "linear_mod1", "branches") if key in m]
    if len(kinds) != 1:
        raise ConfigError("[map] needs exactly one of mod1, linear_mod1, branches")
    kind = kinds[0]
    spec = m[kind]
    if kind == "branches":
        spec = _branches(spec)
    elif kind == "linear_mod1":
        spec = _fraction(spec, "[map] linear_mod1")
    cfg = JobConfig(kind, spec)
    try:
        cfg.iterate = m.getint("iterate", 1)
    except ValueError as exc:
        raise ConfigError("[map] iterate must be an integer") from exc
    if cfg.iterate < 1:
        raise ConfigError("[map] iterate must be >= 1")

    d = cp["discretization"] if cp.has_section("discretization") else {}
    cfg.k = parse_delta(d.get("delta", "2^-13"))
    if d.get("hole"):
        parts = [p for p in d["hole"].replace(",", " ").split() if p]
        if len(parts) != 2:
            raise ConfigError("[discretization] hole needs two endpoints")
        cfg.hole = (_fraction(parts[0], "hole"), _fraction(parts[1], "hole"))

    c = cp["certification"] if cp.has_section("certification") else {}
    cfg.mode = c.get("mode") or None
    try:
        cfg.lambda2_target = float(c.get("lambda2_target", "0.5"))
        cfg.n_max = int(c.get("n_max", "64"))
    except ValueError as exc:
        raise ConfigError(f"[certification] {exc}") from exc
    source = c.get("ly", "computed").strip()
    if source == "user":
        try:
            cfg.ly = (c["ly_A"], c["ly_lambda1"], c["ly_B"])
        except KeyError as exc:
            raise ConfigError(f"[certification] ly = user needs {exc.args[0]}") from exc
    elif source != "computed":
        raise ConfigError(f"[certification] ly must be 'user' or 'computed', got {source!r}")
    cfg.lorenz_l = c.get("lorenz_l")

    o = cp["outputs"] if cp.has_section("outputs") else {}
    steps = o.get("table_steps", "1, 2, 3, 4")
    try:
        cfg.table_steps = tuple(int(s) for s in steps.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError("[outputs] table_steps must be integers") from exc
    dens = o.get("density", "no").strip()
    if dens.lower() in ("yes", "true", "1", "on"):
        cfg.density = True
    elif dens.lower() not in ("no", "false", "0", "off", ""):
        cfg.density, cfg.density_path = True, dens
    cfg.trace_path = o.get("trace") or None

    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key == "delta":
            cfg.k = parse_delta(val)
        elif key == "lambda2_target":
            cfg.lambda2_target = float(val)
        elif key == "n_max":
            cfg.n_max = int(val)
        cfg.overrides[key] = str(val)
    if not cfg.lambda2_target < 1 or cfg.lambda2_target <= 0:
        raise ConfigError("lambda2_target must lie in (0, 1)")
    if cfg.n_max < 1:
        raise ConfigError("n_max must be >= 1")
    cfg.digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return cfg


# -- pipeline ---------------------------------------------------------------------

def build_job_map(cfg: JobConfig):
    if cfg.map_kind == "mod1":
        T = mod1_map(cfg.map_spec)
    elif cfg.map_kind == "linear_mod1":
        T = linear_mod1(cfg.map_spec)
    else:
        T = build_map(cfg.map_spec)
    F = iterate_map(T, cfg.iterate) if cfg.iterate > 1 else T
    return T, F


def _provenance(cfg: JobConfig) -> dict:
    return {"tool": "ulamcert", "version": __version__, "rounding": ROUNDING_MODE,
            "config_sha256": cfg.digest, "backend": _kernels.BACKEND,
            "overrides": dict(sorted(cfg.overrides.items()))}


def _map_summary(F, u) -> dict:
    return {"branches": F.n_branches, "inf_abs_deriv": repr(F.inf_abs_deriv.lo),
            "min_gap": repr(F.min_gap.lo), "unbounded_derivative": F.unbounded_derivative,
            "k": u.k, "nnz": u.nnz}


def _ly(cfg: JobConfig, F, hole: Hole | None):
    if cfg.ly is not None:
        return user_supplied(*cfg.ly)
    if hole is not None:
        return ly_hole(ly_one_step(F), hole)
    if F.unbounded_derivative:
        if cfg.lorenz_l is None:
            raise ConfigError("[certification] lorenz_l is needed for a map with unbounded derivative")
        return ly_lorenz(F, cfg.lorenz_l)
    return ly_iterate(ly_one_step(F))


def _inconclusive(cfg, mode, reason, extra=None) -> Report:
    doc = {"mode": mode, "conclusive": False, "reason": reason,
           "delta": Interval(Fraction(1, cfg.k)).as_strings(),
           "provenance": _provenance(cfg)}
    if extra:
        doc.update(extra)
    return Report(doc, EXIT_INCONCLUSIVE)


def _trace_doc(trace):
    return [[n, repr(lam), repr(err)] for n, lam, err in trace]


def _run(cfg: JobConfig, mode: str, backend=None) -> Report:
    if cfg.mode is not None and cfg.mode != mode:
        raise ConfigError(f"config is for mode {cfg.mode!r}, not {mode!r}")
    if mode == "escape" and cfg.hole is None:
        raise ConfigError("escape mode needs [discretization] hole")
    if mode == "mixing" and cfg.hole is not None:
        raise ConfigError("mixing mode takes no hole")
    hole = Hole.of(*cfg.hole) if cfg.hole is not None else None
    try:
        T, F = build_job_map(cfg)
        ly = _ly(cfg, F, hole)
        ac = approx_coefficients(ly)
    except (NotExpandingError, ExpansionTooWeak) as exc:
        return _inconclusive(cfg, mode, f"{type(exc).__name__}: {exc}")
    u = build_ulam(F, cfg.k)
    if hole is not None:
        u = apply_hole_mask(u, hole, strict=True)
    summary = _map_summary(F, u)
    try:
        if mode == "mixing":
            cc = estimate_lambda2_mixing(u, cfg.lambda2_target, cfg.n_max, backend=backend)
        else:
            cc = estimate_lambda2_escape(u, cfg.lambda2_target, cfg.n_max, backend=backend)
    except NoContraction as exc:
        if cfg.trace_path:
            from .contraction import write_trace
            write_trace(exc.trace, cfg.trace_path)
        return _inconclusive(cfg, mode, str(exc), {"map": summary, "trace": _trace_doc(exc.trace)})
    if cfg.trace_path:
        cc.export_trace(cfg.trace_path)
    dc = certify_decay(ly, ac, cc, Fraction(1, cfg.k), mode)
    tables = power_table(dc.M, cfg.table_steps, dc.n1)
    extra = {"map": summary, "iterate": cfg.iterate, "trace": _trace_doc(cc.trace),
             "provenance": _provenance(cfg)}
    if hole is not None:
        extra["hole"] = hole.interval.as_strings()
    if mode == "mixing" and cfg.density and dc.conclusive:
        dens = invariant_density_with_error(u, dc, ly, ac, cc=cc, backend=backend)
        extra["density"] = {"l1_error": dens.l1_error.as_strings(), "method": dens.method,
                            "terms": dens.terms}
        if cfg.density_path:
            write_density(dens.f_delta.values, cfg.density_path)
    doc = certificate_dict(dc, ly, tables, extra)
    return Report(doc, EXIT_OK if dc.conclusive else EXIT_INCONCLUSIVE, tables)


def run_certify_mixing(cfg: JobConfig, backend=None) -> Report:
    return _run(cfg, "mixing", backend)


def run_certify_escape(cfg: JobConfig, backend=None) -> Report:
    return _run(cfg, "escape", backend)


def write_density(values, path) -> None:
    k = len(values)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x_mid", "density"])
        for i, v in enumerate(values):
            w.writerow([repr((i + 0.5) / k), repr(float(v))])


# -- tables ------------------------------------------------------------------------

TABLE_COLUMNS = ("h", "strong_c1", "strong_c2", "weak_c1", "weak_c2")


def table_rows(report: Report):
    """Upper bounds per row, read from the report document."""
    rows = []
    for t in report.doc.get("tables", []):
        (s1, s2), (w1, w2) = t["strong"], t["weak"]
        rows.append((t["h"], s1[1], s2[1], w1[1], w2[1]))
    return rows


def export_table(report: Report, fmt: str, destination) -> None:
    """Write the power table as CSV (upper bounds) or JSON (full enclosures)."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown table format {fmt!r}")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for row in table_rows(report):
            w.writerow(row)
        text = buf.getvalue()
    else:
        text = json.dumps({"tables": report.doc.get("tables", [])}, sort_keys=True, indent=2) + "\n"
    try:
        Path(destination).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write table to {destination}: {exc.strerror}") from exc


def read_table(path):
    """Inverse of the CSV export (floats)."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        head = next(r)
        if tuple(head) != TABLE_COLUMNS:
            raise ValueError(f"unexpected header {head}")
        return [(int(row[0]), *map(float, row[1:])) for row in r]


# -- main ----------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="certify", description="Certified decay and escape-rate bounds.")
    p.add_argument("mode", choices=("mixing", "escape"))
    p.add_argument("--config", required=True, help="job file (INI)")
    p.add_argument("--delta", help="grid size, e.g. 2^-13")
    p.add_argument("--lambda2-target", dest="lambda2_target", type=float)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--threads", type=int, help="cap on worker threads (results do not depend on it)")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--table", help="write the power table (.json for JSON, otherwise CSV)")
    p.add_argument("--backend", choices=("numba", "numpy"), help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_USER
    try:
        cfg = load_config(text, {"delta": args.delta, "lambda2_target": args.lambda2_target,
                                 "n_max": args.n_max})
        _kernels.set_threads(args.threads)
        report = _run(cfg, args.mode, args.backend)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.text:
            print(f"  {exc.text}\n  {' ' * (exc.position - 1)}^", file=sys.stderr)
        return EXIT_USER
    except (ConfigError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except PrecisionError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    out = report.to_json()
    try:
        if args.out:
            Path(args.out).write_text(out, encoding="utf-8")
        else:
            sys.stdout.write(out)
        if args.table:
            export_table(report, "json" if args.table.endswith(".json") else "csv", args.table)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    doc = report.doc
    if doc.get("conclusive"):
        msg = f"conclusive: rho <= {doc['rho'][1]}, n1 = {doc['n1']}"
        if "escape_rate" in doc:
            msg += f", escape rate >= {doc['escape_rate'][0]} per step"
    else:
        msg = "inconclusive: " + doc.get("reason", f"rho <= {doc.get('rho', ['?', '?'])[1]}")
    print(msg, file=sys.stderr)
    print(f"wall time {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return report.status


if __name__ == "__main__":   # pragma: no cover
    sys.exit(main())
