"""Command-line surface: scenario solves, sweeps, table and certificate
reproduction, lifetimes, and the protocol Monte Carlo.

Commands
--------
solve      one working point (loss minimization, optionally error too)
sweep      grid of working points, one CSV/JSON row each
table3     the 15-row error-minimization survey table
certify    dual certificates over the standard 6 x 6 (e, mu) grid
lifetime   secure storage time for a memory-equipped working point
simulate   honest-protocol Monte Carlo summary

Canonical rows (solve/sweep/lifetime) carry the columns
``scenario, phase_randomized, mu, eta_d, e, f_h, f_d, e_star, gap, secure,
t_star``; table3 and certify use their own documented layouts.  Floats are
printed with 9 significant digits; empty fields mean "not computed".
Re-running a command with the same configuration produces byte-identical
output except for the timestamp header, which ``--no-timestamp`` drops.

A config file (``--config``) holds ``key = value`` lines; ``#`` starts a
comment and lists are comma-separated.  Keys mirror the long flag names
with underscores (e.g. ``mu = 0.1, 0.5`` for ``--mu 0.1 0.5``).  Flags
given on the command line override file values.

Exit codes: 0 success, 1 usage error, 2 partial solver failure, 3 internal
error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone

import numpy as np

from . import protocol_sim, security_analysis
from .security_analysis import (MemoryModel, ScenarioConfig, dual_certificate,
                                honest_loss, min_error_sdp, min_loss_sdp,
                                secure_lifetime, sweep, table3_rows)

CANONICAL_COLUMNS = ("scenario", "phase_randomized", "mu", "eta_d", "e",
                     "f_h", "f_d", "e_star", "gap", "secure", "t_star")

#: Certificate grid: the standard survey of error pins and photon numbers.
CERTIFY_ERRORS = (1e-6, 1e-3, 0.01, 0.02, 0.05, 0.10)
CERTIFY_MUS = (0.01, 0.05, 0.10, 0.50, 1.00, 2.00)


class UsageError(ValueError):
    """Bad flag combination; maps to exit code 1."""


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return format(value, ".9g")
    return str(value)


def _json_value(value):
    if isinstance(value, float):
        if math.isnan(value):
            return None
        # Keep JSON numerically identical to the CSV text.
        return float(format(value, ".9g"))
    return value


def write_rows(columns, rows, path: str | None, fmt: str,
               timestamp: bool) -> str:
    """Serialize rows (list of dicts) as CSV or JSON; returns the text."""
    if fmt == "csv":
        buf = io.StringIO()
        if timestamp:
            buf.write(f"# generated {datetime.now(timezone.utc).isoformat()}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])
        text = buf.getvalue()
    elif fmt == "json":
        payload = {"rows": [{c: _json_value(r.get(c)) for c in columns}
                            for r in rows]}
        if timestamp:
            payload["generated"] = datetime.now(timezone.utc).isoformat()
        text = json.dumps(payload, indent=2) + "\n"
    else:
        raise UsageError(f"unknown format {fmt!r} (expected csv or json)")
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def report_row(rep: security_analysis.SecurityReport,
               t_star: float | None = None) -> dict:
    return {
        "scenario": rep.scenario,
        "phase_randomized": rep.phase_randomized,
        "mu": rep.mu,
        "eta_d": rep.eta_d,
        "e": rep.error_target,
        "f_h": rep.f_h,
        "f_d": rep.f_d,
        "e_star": rep.e_star,
        "gap": rep.gap,
        "secure": rep.secure,
        "t_star": t_star,
    }


def _parse_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(
                    f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = line.split("=", 1)
            out[key.strip().lower()] = value.strip()
    return out


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmoney",
        description="Security numerics for coherent-state quantum money "
                    "with classical verification.")
    parser.add_argument("--config", help="key = value configuration file")
    sub = parser.add_subparsers(dest="command")

    def add_common(p, grids=False):
        p.add_argument("--scenario", choices=["trusted", "untrusted"],
                       default=None)
        p.add_argument("--phase-randomized", action="store_true",
                       default=None)
        p.add_argument("--eta-d", type=float, default=None)
        if grids:
            p.add_argument("--mu", type=float, nargs="*", default=None)
            p.add_argument("--error", type=float, nargs="*", default=None)
        else:
            p.add_argument("--mu", type=float, default=None)
            p.add_argument("--error", type=float, default=None)
        p.add_argument("--output", default=None)
        p.add_argument("--format", choices=["csv", "json"], default=None)
        p.add_argument("--no-timestamp", action="store_true", default=None)
        p.add_argument("--workers", type=int, default=None)

    p_solve = sub.add_parser("solve", help="solve one working point")
    add_common(p_solve)
    p_solve.add_argument("--with-error", action="store_true", default=None,
                         help="also run the error minimization")

    p_sweep = sub.add_parser("sweep", help="solve a grid of working points")
    add_common(p_sweep, grids=True)
    p_sweep.add_argument("--eta-d-grid", type=float, nargs="*", default=None)
    p_sweep.add_argument("--both-scenarios", action="store_true",
                         default=None)

    p_t3 = sub.add_parser("table3", help="15-row error-minimization survey")
    add_common(p_t3)

    p_cert = sub.add_parser("certify", help="dual certificates on the "
                                            "standard (e, mu) grid")
    add_common(p_cert, grids=True)

    p_life = sub.add_parser("lifetime", help="secure storage time")
    add_common(p_life)
    p_life.add_argument("--eta-m0", type=float, default=None)
    p_life.add_argument("--tau", type=float, default=None)

    p_sim = sub.add_parser("simulate", help="honest protocol Monte Carlo")
    add_common(p_sim)
    p_sim.add_argument("--positions", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    return parser


_DEFAULTS = {
    "scenario": "trusted",
    "phase_randomized": False,
    "eta_d": 1.0,
    "mu": 0.5,
    "error": 0.0,
    "format": "csv",
    "output": None,
    "no_timestamp": False,
    "workers": 1,
    "with_error": False,
    "eta_d_grid": None,
    "both_scenarios": False,
    "eta_m0": 0.68,
    "tau": 15.0,
    "positions": 100_000,
    "seed": 7,
}

_LIST_KEYS = {"mu", "error", "eta_d_grid"}
_BOOL_KEYS = {"phase_randomized", "no_timestamp", "with_error",
              "both_scenarios"}
_INT_KEYS = {"workers", "positions", "seed"}
_FLOAT_KEYS = {"eta_d", "eta_m0", "tau"}


def merge_options(args: argparse.Namespace, grids: bool) -> dict:
    """Defaults < config file < command-line flags."""
    merged = dict(_DEFAULTS)
    if grids:
        # Grid commands have no implicit grid: sweep demands explicit lists,
        # certify falls back to its standard survey grid.
        merged["mu"] = None
        merged["error"] = None
    if args.config:
        file_vals = _parse_config_file(args.config)
        if "command" in file_vals:
            file_vals.pop("command")
        for key, text in file_vals.items():
            key = key.replace("-", "_")
            if key not in merged:
                raise UsageError(f"unknown config key {key!r}")
            if key in _LIST_KEYS or (grids and key in ("mu", "error")):
                merged[key] = _float_list(text)
            elif key in _BOOL_KEYS:
                merged[key] = text.lower() in ("1", "true", "yes", "on")
            elif key in _INT_KEYS:
                merged[key] = int(text)
            elif key in _FLOAT_KEYS or key in ("mu", "error"):
                merged[key] = float(text)
            else:
                merged[key] = text
    for key, value in vars(args).items():
        if key in ("config", "command") or value is None:
            continue
        merged[key] = value
    return merged


def _scenario_list(opts) -> list[tuple[str, bool]]:
    if opts.get("both_scenarios"):
        pr = bool(opts["phase_randomized"])
        return [("trusted", pr), ("untrusted", pr)]
    return [(opts["scenario"], bool(opts["phase_randomized"]))]


def cmd_solve(opts) -> tuple[list, int]:
    cfg = ScenarioConfig(scenario=opts["scenario"],
                         phase_randomized=bool(opts["phase_randomized"]),
                         mu=float(opts["mu"]), eta_d=float(opts["eta_d"]),
                         error_target=float(opts["error"]))
    rep = min_loss_sdp(cfg, keep_solution=False)
    row = report_row(rep)
    if opts["with_error"]:
        err = min_error_sdp(cfg, keep_solution=False)
        row["e_star"] = err.e_star
    bad = 0 if rep.status in ("optimal",) else 1
    return [row], bad


def cmd_sweep(opts) -> tuple[list, int]:
    mus = opts["mu"]
    errors = opts["error"] if opts["error"] is not None else [0.0]
    etas = opts["eta_d_grid"] or [opts["eta_d"]]
    if not mus:
        raise UsageError("sweep needs a nonempty --mu grid")
    if not errors:
        raise UsageError("sweep needs a nonempty --error grid")
    reports = sweep(mus, errors, etas, _scenario_list(opts),
                    workers=int(opts["workers"]))
    failures = sum(1 for r in reports if not r.status.startswith("optimal"))
    return [report_row(r) for r in reports], failures


def cmd_table3(opts) -> tuple[list, int]:
    rows = table3_rows(workers=int(opts["workers"]))
    out = [{
        "phase_randomized": r.phase_randomized,
        "eta_d": r.eta_d,
        "mu": r.mu,
        "e_trusted": r.e_trusted,
        "e_untrusted": r.e_untrusted,
        "f_h": r.f_h,
    } for r in rows]
    print("mu      e_trusted  e_untrusted  f_h     (percent view)")
    for r in rows:
        print(f"{r.mu:4.2f}    {100 * r.e_trusted:5.1f}%     "
              f"{100 * r.e_untrusted:5.1f}%    {100 * r.f_h:5.1f}%"
              f"   [randomized={r.phase_randomized} eta_d={r.eta_d}]")
    return out, 0


def cmd_certify(opts) -> tuple[list, int]:
    mus = opts["mu"] if opts["mu"] is not None else list(CERTIFY_MUS)
    errors = (opts["error"] if opts["error"] is not None
              else list(CERTIFY_ERRORS))
    rows = []
    invalid = 0
    for e in errors:
        for mu in mus:
            cfg = ScenarioConfig(scenario="trusted", mu=float(mu),
                                 error_target=float(e))
            rep = min_loss_sdp(cfg)
            cert = dual_certificate(cfg, rep.solution)
            rows.append({
                "mu": mu, "e": e, "f_d": rep.f_d,
                "d1": cert.d1, "d2": cert.d2, "d3": cert.d3,
                "gap": cert.gap, "offdiag_max": cert.offdiag_max,
                "trace_identity_error": cert.trace_identity_error,
                "lmi_max_eigenvalue": cert.lmi_max_eigenvalue,
                "valid": cert.valid,
            })
            invalid += 0 if cert.valid else 1
    return rows, invalid


def cmd_lifetime(opts) -> tuple[list, int]:
    memory = MemoryModel(eta_m0=float(opts["eta_m0"]),
                         tau=float(opts["tau"]))
    cfg = ScenarioConfig(scenario=opts["scenario"],
                         phase_randomized=bool(opts["phase_randomized"]),
                         mu=float(opts["mu"]), eta_d=float(opts["eta_d"]),
                         error_target=float(opts["error"]), memory=memory)
    rep = min_loss_sdp(cfg, keep_solution=False)
    t_star = secure_lifetime(cfg)
    return [report_row(rep, t_star=t_star)], 0


def cmd_simulate(opts) -> tuple[list, int]:
    n = int(opts["positions"])
    mu = float(opts["mu"])
    eta_d = float(opts["eta_d"])
    seed = int(opts["seed"])
    card = protocol_sim.issue_card(n, mu, seed=seed)
    transcript = protocol_sim.measure_honest(card, eta_d=eta_d,
                                             seed=seed + 1)
    result = protocol_sim.bank_verify(card, transcript)
    matched = transcript.challenges == card.basis_bits
    answered = transcript.answers != protocol_sim.NO_CLICK
    checked = matched & answered
    wrong = int(np.count_nonzero(
        checked & (transcript.answers != card.key_bits)))
    row = {
        "mu": mu, "eta_d": eta_d, "positions": n, "seed": seed,
        "no_detection_fraction": float(np.mean(~answered)),
        "expected_no_detection": honest_loss(mu, eta_d),
        "matched_error_rate": wrong / max(int(np.count_nonzero(checked)), 1),
        "double_clicks": transcript.double_clicks,
        "accepted": result.accepted,
    }
    return [row], 0


_COMMANDS = {
    "solve": (cmd_solve, CANONICAL_COLUMNS, False),
    "sweep": (cmd_sweep, CANONICAL_COLUMNS, True),
    "table3": (cmd_table3, ("phase_randomized", "eta_d", "mu", "e_trusted",
                            "e_untrusted", "f_h"), False),
    "certify": (cmd_certify, ("mu", "e", "f_d", "d1", "d2", "d3", "gap",
                              "offdiag_max", "trace_identity_error",
                              "lmi_max_eigenvalue", "valid"), True),
    "lifetime": (cmd_lifetime, CANONICAL_COLUMNS, False),
    "simulate": (cmd_simulate, ("mu", "eta_d", "positions", "seed",
                                "no_detection_fraction",
                                "expected_no_detection",
                                "matched_error_rate", "double_clicks",
                                "accepted"), False),
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    if command is None and args.config:
        file_vals = _parse_config_file(args.config)
        command = file_vals.get("command")
    if command not in _COMMANDS:
        parser.print_usage(sys.stderr)
        print(f"qmoney: missing or unknown command {command!r}",
              file=sys.stderr)
        return 1
    handler, columns, grids = _COMMANDS[command]
    try:
        opts = merge_options(args, grids)
        rows, failures = handler(opts)
        write_rows(columns, rows, opts["output"], opts["format"],
                   timestamp=not opts["no_timestamp"])
    except UsageError as exc:
        print(f"qmoney: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"qmoney: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"qmoney: internal error: {exc}", file=sys.stderr)
        return 3
    return 0 if failures == 0 else 2


if __name__ == "__main__":
    sys.exit(main())
