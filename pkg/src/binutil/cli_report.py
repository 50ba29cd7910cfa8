"""Command-line front end emitting machine-readable lattice-market reports.

Subcommands
-----------
tailcheck : dominance-constant scans plus the analytic certificate gate
coeffs    : pricing coefficients with asymptotic comparison columns
converge  : lattice-to-continuous value convergence tables with verdicts
uiprobe   : tail-sum curves against Gaussian dominating bounds
report    : all of the above under one shared configuration

Determinism: a fixed configuration produces byte-identical files. Floats
print with 17 significant digits, task results are ordered by (p, n)
regardless of worker completion order, and every output embeds the
configuration hash and package version. Non-finite values serialize as the
strings "Infinity", "-Infinity", "NaN" (JSON has no literals for them).

Exit codes: 0 all gates pass; 1 configuration error; 2 I/O failure;
3 numerical failure or a failed gate. BINUTIL_THREADS caps the worker pool.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from . import utility as ut
from .binomial_core import build_grid
from .errors import BinutilError, InvalidUtilityError, UsageError
from .martingale import coefficients, density_on_grid, one_step_risk_neutral_check
from .tail_bounds import g_bound_check, minimal_constant
from .value_functions import convergence_sweep, uniform_integrability_probe

_G_MARGIN_TOL = 1e-9
_REMARK_SLACK = 1e-9
_RESIDUAL_TOL = 1e-12
_DEFAULT_M = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
_REPORT_DEFAULT_N = "2^6..2^12"


# ---- deterministic serialization ---------------------------------------------


def format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _render_json(obj, level: int) -> str:
    pad = "  " * level
    inner = "  " * (level + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = []
        for key in sorted(obj):
            if not isinstance(key, str):
                raise TypeError(f"JSON keys must be strings, got {key!r}")
            parts.append(f"{inner}{_escape(key)}: {_render_json(obj[key], level + 1)}")
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        parts = [f"{inner}{_render_json(v, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format_float(x) if math.isfinite(x) else _escape(format_float(x))
    if isinstance(obj, str):
        return _escape(obj)
    if obj is None:
        return "null"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _escape(s: str) -> str:
    import json as _json

    return _json.dumps(s, ensure_ascii=True)


def render_json(obj) -> str:
    return _render_json(obj, 0) + "\n"


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(float(v))
    if v is None:
        return ""
    raise TypeError(f"cannot place {type(v).__name__} in CSV")


def render_csv(header: list[str], rows: list[list], config_hash: str) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header) + ["config_hash", "version"])
    for row in rows:
        writer.writerow([_cell(v) for v in row] + [config_hash, __version__])
    return buf.getvalue()


# ---- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    p_values: tuple[float, ...]
    n_values: tuple[int, ...]
    utility: str
    y: float | None
    x: float | None
    tol: float
    out_dir: str
    format: str
    probe: bool

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "p_values": list(self.p_values),
            "n_values": list(self.n_values),
            "utility": self.utility,
            "y": self.y,
            "x": self.x,
            "tol": self.tol,
            "out_dir": self.out_dir,
            "format": self.format,
            "probe": self.probe,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        try:
            cfg = cls(
                subcommand=d["subcommand"],
                p_values=tuple(float(v) for v in d["p_values"]),
                n_values=tuple(int(v) for v in d["n_values"]),
                utility=d["utility"],
                y=None if d["y"] is None else float(d["y"]),
                x=None if d["x"] is None else float(d["x"]),
                tol=float(d["tol"]),
                out_dir=d["out_dir"],
                format=d["format"],
                probe=bool(d["probe"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"malformed run configuration: {exc}") from exc
        if any(not math.isfinite(p) or not 0.0 < p < 1.0 for p in cfg.p_values):
            raise UsageError(f"p values must lie in (0, 1), got {list(cfg.p_values)}")
        if any(n < 1 for n in cfg.n_values):
            raise UsageError(f"n values must be >= 1, got {list(cfg.n_values)}")
        if not math.isfinite(cfg.tol) or cfg.tol < 0.0:
            raise UsageError(f"tol must be a finite nonnegative real, got {cfg.tol}")
        if cfg.format not in ("csv", "json", "both"):
            raise UsageError(f"format must be csv, json or both, got {cfg.format!r}")
        for name, v in (("y", cfg.y), ("x", cfg.x)):
            if v is not None and (not math.isfinite(v) or v <= 0.0):
                raise UsageError(f"{name} must be a finite positive real, got {v}")
        return cfg

    def config_hash(self) -> str:
        digest = hashlib.sha256(render_json(self.to_dict()).encode("utf-8"))
        return digest.hexdigest()[:16]


def parse_n_values(text: str) -> tuple[int, ...]:
    """Parse a comma list of n tokens; "2^a..2^b" expands to a doubling run."""
    values: set[int] = set()
    for token in (t.strip() for t in text.split(",")):
        if not token:
            continue
        m = re.fullmatch(r"2\^(\d+)\.\.2\^(\d+)", token)
        if m:
            a, b = int(m.group(1)), int(m.group(2))
            if b < a:
                raise UsageError(f"descending doubling range {token!r}")
            values.update(2**j for j in range(a, b + 1))
            continue
        m = re.fullmatch(r"2\^(\d+)", token)
        if m:
            values.add(2 ** int(m.group(1)))
            continue
        if re.fullmatch(r"\d+", token):
            n = int(token)
            if n < 1:
                raise UsageError(f"n must be positive, got {token!r}")
            values.add(n)
            continue
        raise UsageError(f"cannot parse n token {token!r}")
    if not values:
        raise UsageError("empty n list")
    return tuple(sorted(values))


def parse_p_values(text: str, probe: bool) -> tuple[float, ...]:
    out = []
    for token in (t.strip() for t in text.split(",")):
        if not token:
            continue
        try:
            p = float(token)
        except ValueError as exc:
            raise UsageError(f"cannot parse p token {token!r}") from exc
        if not math.isfinite(p) or not 0.0 < p < 1.0:
            raise UsageError(f"p must lie in (0, 1), got {token}")
        if p < 0.5 and not probe:
            raise UsageError(f"p = {p} is below 1/2; pass --probe to run anyway")
        out.append(p)
    if not out:
        raise UsageError("empty p list")
    return tuple(sorted(set(out)))


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); keep the contract
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="binutil", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, blurb in (
        ("tailcheck", "scan dominance constants and the certificate margin"),
        ("coeffs", "pricing coefficients and asymptotic remainders"),
        ("converge", "value convergence tables with verdicts"),
        ("uiprobe", "tail-sum curves against Gaussian bounds"),
        ("report", "run every subcommand with one configuration"),
    ):
        sp = sub.add_parser(name, help=blurb)
        sp.add_argument("--p", default="0.5", help="comma list of p in (0,1)")
        sp.add_argument("--n", default=None,
                        help="comma list of n; 2^a..2^b expands doublings")
        sp.add_argument("--utility", default="log",
                        help="power:<gamma> | log | table:<csv path>")
        sp.add_argument("--y", type=float, default=None,
                        help="dual argument (converge: selects dual mode)")
        sp.add_argument("--x", type=float, default=None,
                        help="primal argument (converge: selects primal mode)")
        sp.add_argument("--tol", type=float, default=1e-3,
                        help="convergence verdict tolerance (0 is degenerate: never PASS)")
        sp.add_argument("--out", default="binutil_out", help="output directory")
        sp.add_argument("--format", choices=("csv", "json", "both"),
                        default="both", help="output file formats")
        sp.add_argument("--probe", action="store_true",
                        help="allow p < 1/2; gates become observations")
    return parser


def config_from_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    if ns.n is None:
        if ns.subcommand == "report":
            ns.n = _REPORT_DEFAULT_N
        else:
            raise UsageError(f"--n is required for {ns.subcommand}")
    for label, v in (("--y", ns.y), ("--x", ns.x)):
        if v is not None and (not math.isfinite(v) or v <= 0.0):
            raise UsageError(f"{label} must be a finite positive number, got {v}")
    if not math.isfinite(ns.tol) or ns.tol < 0.0:
        raise UsageError(f"--tol must be nonnegative, got {ns.tol}")
    return RunConfig(
        subcommand=ns.subcommand,
        p_values=parse_p_values(ns.p, ns.probe),
        n_values=parse_n_values(ns.n),
        utility=ns.utility,
        y=ns.y,
        x=ns.x,
        tol=ns.tol,
        out_dir=ns.out,
        format=ns.format,
        probe=ns.probe,
    )


# ---- output helpers ------------------------------------------------------------


def _pool_size() -> int:
    env = os.environ.get("BINUTIL_THREADS", "").strip()
    if env:
        try:
            v = int(env)
        except ValueError as exc:
            raise UsageError(f"BINUTIL_THREADS must be an integer, got {env!r}") from exc
        if v < 1:
            raise UsageError(f"BINUTIL_THREADS must be >= 1, got {v}")
        return v
    return min(8, os.cpu_count() or 1)


def _run_tasks(fn, tasks: list):
    """Map fn over tasks on the worker pool, preserving task order."""
    workers = _pool_size()
    if len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def _write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _out_path(config: RunConfig, name: str) -> str:
    return os.path.join(config.out_dir, name)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", text)


def _p_tag(p: float) -> str:
    return format(p, "g")


def _with_meta(config_hash: str, payload: dict) -> dict:
    return {"config_hash": config_hash, "version": __version__, **payload}


# ---- subcommands ---------------------------------------------------------------


def cmd_tailcheck(config: RunConfig) -> int:
    h = config.config_hash()
    tasks = [(p, n) for p in config.p_values for n in config.n_values]

    def work(pn):
        p, n = pn
        rep = minimal_constant(n, p, probe=config.probe)
        record = rep.as_dict()
        if p >= 0.5:
            gb = g_bound_check(n, p)
            record["g_margin"] = gb.max_margin
            record["g_argmax_k"] = gb.argmax_k
            record["g_checked_count"] = gb.checked_count
            gate_ok = gb.max_margin <= _G_MARGIN_TOL and rep.remark_consistent(_REMARK_SLACK)
            record["gate"] = "pass" if gate_ok else "fail"
        else:
            record["g_margin"] = None
            record["g_argmax_k"] = None
            record["g_checked_count"] = 0
            record["gate"] = "probe"
        record["remark_consistent"] = rep.remark_consistent(_REMARK_SLACK)
        return record

    records = _run_tasks(work, tasks)
    if config.format in ("json", "both"):
        for record in records:
            name = f"tailcheck_p{_p_tag(record['p'])}_n{record['n']}.json"
            _write(_out_path(config, name), render_json(_with_meta(h, record)))
    if config.format in ("csv", "both"):
        columns = [
            "n", "p", "c_right", "c_left", "argmax_right", "argmax_left",
            "c_global_right", "c_global_left", "log_c_right", "log_c_left",
            "log_c_global_right", "log_c_global_left", "g_margin",
            "remark_consistent", "gate",
        ]
        for p in config.p_values:
            rows = [[r[c] for c in columns]
                    for r in records if r["p"] == p]
            text = render_csv(columns, rows, h)
            _write(_out_path(config, f"tailcheck_p{_p_tag(p)}.csv"), text)
    failures = [r for r in records if r["gate"] == "fail"]
    summary = _with_meta(h, {
        "config": config.to_dict(),
        "cases": [{"n": r["n"], "p": r["p"], "gate": r["gate"]} for r in records],
        "failed_cases": len(failures),
        "overall": "pass" if not failures else "fail",
    })
    _write(_out_path(config, "tailcheck_summary.json"), render_json(summary))
    return 0 if not failures else 3


def cmd_coeffs(config: RunConfig) -> int:
    h = config.config_hash()
    tasks = [(p, n) for p in config.p_values for n in config.n_values]

    def work(pn):
        p, n = pn
        co = coefficients(n, p, probe=config.probe)
        rn = one_step_risk_neutral_check(n, p, co)
        norm = density_on_grid(build_grid(n, p), co).normalization_residual()
        return {
            "n": n,
            "p": p,
            "a": co.a,
            "b": co.b,
            "a_asym2": co.a_asym2,
            "b_asym2": co.b_asym2,
            "a_gap_scaled": (co.a - co.a_asym2) * n,
            "b_gap_scaled": (co.b - co.b_asym2) * n * n,
            "risk_neutral_residual": rn,
            "normalization_residual": norm,
        }

    records = _run_tasks(work, tasks)
    columns = ["n", "p", "a", "b", "a_asym2", "b_asym2", "a_gap_scaled",
               "b_gap_scaled", "risk_neutral_residual", "normalization_residual"]
    for p in config.p_values:
        rows = [r for r in records if r["p"] == p]
        if config.format in ("json", "both"):
            payload = _with_meta(h, {"p": p, "rows": rows})
            _write(_out_path(config, f"coeffs_p{_p_tag(p)}.json"), render_json(payload))
        if config.format in ("csv", "both"):
            text = render_csv(columns, [[r[c] for c in columns] for r in rows], h)
            _write(_out_path(config, f"coeffs_p{_p_tag(p)}.csv"), text)
    worst = max(max(r["risk_neutral_residual"], r["normalization_residual"])
                for r in records)
    summary = _with_meta(h, {
        "config": config.to_dict(),
        "worst_residual": worst,
        "residual_tolerance": _RESIDUAL_TOL,
        "overall": "pass" if worst <= _RESIDUAL_TOL else "fail",
    })
    _write(_out_path(config, "coeffs_summary.json"), render_json(summary))
    return 0 if worst <= _RESIDUAL_TOL else 3


def cmd_converge(config: RunConfig) -> int:
    h = config.config_hash()
    spec = ut.parse(config.utility)
    modes: list[tuple[str, float]] = []
    if config.y is not None:
        modes.append(("dual", config.y))
    if config.x is not None:
        modes.append(("primal", config.x))
    if not modes:
        modes = [("dual", 1.0), ("primal", 1.0)]
    tasks = [(p, mode, arg) for p in config.p_values for mode, arg in modes]

    def work(task):
        p, mode, arg = task
        return convergence_sweep(spec, p, arg, mode, list(config.n_values),
                                 probe=config.probe)

    tables = _run_tasks(work, tasks)
    any_error = False
    verdicts = []
    for (p, mode, arg), table in zip(tasks, tables):
        any_error = any_error or not all(r.finite for r in table.rows)
        passed = table.gaps_below(config.tol)
        verdicts.append({
            "p": p,
            "mode": mode,
            "argument": arg,
            "final_gap": table.final_gap(),
            "verdict": "PASS" if passed else "FAIL",
        })
        stem = f"converge_{_slug(spec.label)}_{mode}_p{_p_tag(p)}"
        if config.format in ("json", "both"):
            payload = _with_meta(h, {
                "p": p,
                "utility": table.utility,
                "mode": mode,
                "argument": arg,
                "tolerance": config.tol,
                "continuous_value": table.continuous.value,
                "continuous_error_estimate": table.continuous.error_estimate,
                "rows": [{
                    "n": r.n, "value": r.value, "gap": r.gap,
                    "error_estimate": r.error_estimate, "finite": r.finite,
                    "reason": r.reason,
                } for r in table.rows],
                "final_gap": table.final_gap(),
                "dual_sign_consistent": table.dual_sign_consistent(config.tol),
                "verdict": "PASS" if passed else "FAIL",
            })
            _write(_out_path(config, stem + ".json"), render_json(payload))
        if config.format in ("csv", "both"):
            rows = [[r.n, r.value, r.gap, r.error_estimate] for r in table.rows]
            text = render_csv(["n", "value", "gap", "error_estimate"], rows, h)
            _write(_out_path(config, stem + ".csv"), text)
    overall_pass = all(v["verdict"] == "PASS" for v in verdicts) and not any_error
    summary = _with_meta(h, {
        "config": config.to_dict(),
        "verdicts": verdicts,
        "row_errors": any_error,
        "overall": "pass" if overall_pass else "fail",
    })
    _write(_out_path(config, "converge_summary.json"), render_json(summary))
    return 0 if overall_pass else 3


def cmd_ui_probe(config: RunConfig) -> int:
    h = config.config_hash()
    spec = ut.parse(config.utility)
    y = 1.0 if config.y is None else config.y

    def work(p):
        return uniform_integrability_probe(
            spec, p, y, list(_DEFAULT_M), list(config.n_values),
            probe=config.probe and p < 0.5,
        )

    reports = _run_tasks(work, list(config.p_values))
    verdicts = []
    for p, rep in zip(config.p_values, reports):
        if rep.probe:
            verdict = "probe"
        else:
            verdict = "pass" if (rep.dominance_ok and rep.sup_nonincreasing()) else "fail"
        verdicts.append({"p": p, "verdict": verdict})
        stem = f"uiprobe_{_slug(spec.label)}_p{_p_tag(p)}"
        if config.format in ("json", "both"):
            payload = _with_meta(h, {
                "p": rep.p,
                "utility": rep.utility,
                "y": rep.y,
                "m_values": list(rep.m_values),
                "n_values": list(rep.n_values),
                "right_sums": [list(row) for row in rep.right_sums],
                "left_sums": [list(row) for row in rep.left_sums],
                "sup_right": list(rep.sup_right),
                "sup_left": list(rep.sup_left),
                "gauss_right_integrals": list(rep.right_integrals),
                "gauss_left_integrals": list(rep.left_integrals),
                "dominance_ok": rep.dominance_ok,
                "dominance_failures": [list(f) for f in rep.dominance_failures],
                "probe": rep.probe,
                "verdict": verdict,
            })
            _write(_out_path(config, stem + ".json"), render_json(payload))
        if config.format in ("csv", "both"):
            rows = [[m, rep.sup_right[j], rep.sup_left[j],
                     rep.right_integrals[j], rep.left_integrals[j]]
                    for j, m in enumerate(rep.m_values)]
            text = render_csv(
                ["m", "sup_right", "sup_left", "gauss_right_integral",
                 "gauss_left_integral"], rows, h)
            _write(_out_path(config, stem + ".csv"), text)
    failed = [v for v in verdicts if v["verdict"] == "fail"]
    summary = _with_meta(h, {
        "config": config.to_dict(),
        "verdicts": verdicts,
        "overall": "pass" if not failed else "fail",
    })
    _write(_out_path(config, "uiprobe_summary.json"), render_json(summary))
    return 0 if not failed else 3


def cmd_report(config: RunConfig) -> int:
    codes = {
        "tailcheck": cmd_tailcheck(config),
        "coeffs": cmd_coeffs(config),
        "converge": cmd_converge(config),
        "uiprobe": cmd_ui_probe(config),
    }
    summary = _with_meta(config.config_hash(), {
        "config": config.to_dict(),
        "exit_codes": codes,
        "overall": "pass" if all(c == 0 for c in codes.values()) else "fail",
    })
    _write(_out_path(config, "report_summary.json"), render_json(summary))
    return max(codes.values())


_DISPATCH = {
    "tailcheck": cmd_tailcheck,
    "coeffs": cmd_coeffs,
    "converge": cmd_converge,
    "uiprobe": cmd_ui_probe,
    "report": cmd_report,
}


def main(argv=None) -> int:
    try:
        config = config_from_args(argv)
    except UsageError as exc:
        print(f"binutil: configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        return _DISPATCH[config.subcommand](config)
    except (UsageError, InvalidUtilityError) as exc:
        print(f"binutil: configuration error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"binutil: i/o error: {exc}", file=sys.stderr)
        return 2
    except BinutilError as exc:
        print(f"binutil: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
