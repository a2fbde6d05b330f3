"""
Command-line front end.

    radar-jde run --n 128 --snr-db 6 --snapshots 10000 --seed 7 --out run.csv
    radar-jde sweep --sweep-db 0,2,4,6,8,10,12,14,16 --out sweep.csv
    radar-jde verify-joint --format json

Flags override values from ``--config FILE`` (JSON), which override the
built-in defaults. The default seed can be set through ``JDE_SEED``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass

from . import __version__
from .harness import (
    CampaignResult,
    run_campaign,
    snr_db_to_linear,
    snr_linear_to_db,
    snr_sweep,
    verify_cascaded_theorem,
    verify_joint_theorem,
)
from .jdeers import Rule
from .signal_model import PreconditionError, SystemConfig

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VERIFY_FAILED = 4

COMMANDS = ("info", "run", "sweep", "verify-joint", "verify-cascaded")
CSV_HEADER = (
    "snr_db", "m", "i_joint", "i_detect", "i_estimate", "i_emp_sap",
    "i_emp_cascaded_detect", "i_emp_cascaded_estimate", "ed_joint", "ed_emp", "mc_std_err",
)
DEFAULT_SNAPSHOTS = 10_000
DEFAULT_CHECKPOINTS = (100, 1000, 10_000)
DEFAULT_SWEEP_DB = tuple(float(db) for db in range(0, 17, 2))
DEFAULT_SEED = 2022


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Invocation:
    command: str
    config: SystemConfig
    snapshots: int
    checkpoints: tuple[int, ...]
    rules: tuple[Rule, ...]
    sweep_db: tuple[float, ...]
    out: str | None
    fmt: str
    workers: int


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _rule_list(text: str) -> tuple[Rule, ...]:
    try:
        return tuple(Rule(t.strip().lower()) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"rules must be among {[r.value for r in Rule]}, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="radar-jde", description="Joint radar detection/estimation information limits.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON file with SystemConfig fields and run options")
    p.add_argument("--n", type=int, help="time-bandwidth product N (even)")
    snr = p.add_mutually_exclusive_group()
    snr.add_argument("--snr-db", type=float, help="SNR in dB")
    snr.add_argument("--snr", type=float, help="linear SNR rho^2")
    p.add_argument("--prior", type=float, help="prior probability of target presence")
    p.add_argument("--snapshots", type=int, help="number of Monte Carlo snapshots M")
    p.add_argument("--checkpoints", type=_int_list, help="comma-separated M checkpoints")
    p.add_argument("--oversample", type=int, help="delay grid points per unit delay")
    p.add_argument("--edge-margin", type=float, help="keep true delays this far from the edges")
    p.add_argument("--seed", type=int, help="master seed (default: $JDE_SEED or %d)" % DEFAULT_SEED)
    p.add_argument("--rules", type=_rule_list, help="comma-separated subset of map,sap,cascaded")
    p.add_argument("--sweep-db", type=_float_list, help="SNR grid in dB for 'sweep'")
    p.add_argument("--workers", type=int, default=None, help="worker processes")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), dest="fmt")
    return p


_CONFIG_FLAGS = {
    "n_samples": "n",
    "prior_present": "prior",
    "oversample": "oversample",
    "edge_margin": "edge_margin",
    "seed": "seed",
}


def _load_file(path: str) -> dict:
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    # a manifest or JSON result embeds the config under "config"
    return {**data.get("config", {}), **{k: v for k, v in data.items() if k != "config"}}


def parse_config(args: list[str], env: dict | None = None) -> Invocation:
    """Resolve command line, optional config file and defaults."""
    env = os.environ if env is None else env
    ns = build_parser().parse_args(args)
    file_values = _load_file(ns.config) if ns.config else {}

    fields = {f.name for f in dataclasses.fields(SystemConfig)}
    unknown = set(file_values) - fields - {"snr_db", "snapshots", "checkpoints", "rules", "sweep_db", "workers", "format"}
    # results files carry extra keys; only plain config files are strict
    if unknown and not {"manifest", "rows", "digest"} & set(file_values):
        raise UsageError(f"unknown keys in config file: {sorted(unknown)}")

    values = {k: v for k, v in file_values.items() if k in fields}
    if "snr_db" in file_values and "snr" not in file_values:
        values["snr"] = snr_db_to_linear(float(file_values["snr_db"]))
    if "seed" not in values and env.get("JDE_SEED"):
        try:
            values["seed"] = int(env["JDE_SEED"])
        except ValueError:
            raise UsageError(f"JDE_SEED must be an integer, got {env['JDE_SEED']!r}")
    for name, flag in _CONFIG_FLAGS.items():
        if getattr(ns, flag) is not None:
            values[name] = getattr(ns, flag)
    if ns.snr is not None:
        values["snr"] = ns.snr
    if ns.snr_db is not None:
        values["snr"] = snr_db_to_linear(ns.snr_db)
    values.setdefault("seed", DEFAULT_SEED)
    try:
        config = SystemConfig(**values)
    except (PreconditionError, TypeError) as exc:
        raise UsageError(str(exc))

    snapshots = ns.snapshots if ns.snapshots is not None else int(file_values.get("snapshots", DEFAULT_SNAPSHOTS))
    if snapshots < 1:
        raise UsageError("--snapshots must be positive")
    if ns.checkpoints is not None:
        checkpoints = ns.checkpoints
    elif "checkpoints" in file_values:
        checkpoints = tuple(int(c) for c in file_values["checkpoints"])
    else:
        checkpoints = tuple(c for c in DEFAULT_CHECKPOINTS if c < snapshots) + (snapshots,)
    checkpoints = tuple(sorted(set(checkpoints)))
    if not checkpoints or checkpoints[0] < 1 or checkpoints[-1] > snapshots:
        raise UsageError(f"checkpoints must lie in [1, {snapshots}]")

    if ns.rules is not None:
        rules = ns.rules
    elif "rules" in file_values:
        rules = _rule_list(",".join(file_values["rules"]))
    else:
        rules = (Rule.SAP, Rule.CASCADED, Rule.MAP)
    if not rules:
        raise UsageError("--rules must name at least one rule")

    sweep_db = ns.sweep_db or tuple(file_values.get("sweep_db", DEFAULT_SWEEP_DB))
    if any(b <= a for a, b in zip(sweep_db, sweep_db[1:])):
        raise UsageError("--sweep-db must be strictly ascending")
    workers = ns.workers if ns.workers is not None else int(file_values.get("workers", 1))
    if workers < 1:
        raise UsageError("--workers must be positive")
    fmt = ns.fmt or file_values.get("format") or ("json" if ns.command.startswith("verify") else "csv")
    return Invocation(ns.command, config, snapshots, checkpoints, tuple(rules), tuple(sweep_db), ns.out, fmt, workers)


def config_to_args(config: SystemConfig) -> list[str]:
    """Flags that reproduce ``config`` exactly (floats via repr)."""
    if config.noiseless:
        raise ValueError("noiseless mode has no command-line flag")
    return [
        "--n", str(config.n_samples),
        "--snr", repr(float(config.snr)),
        "--prior", repr(float(config.prior_present)),
        "--oversample", str(config.oversample),
        "--edge-margin", repr(float(config.edge_margin)),
        "--seed", str(config.seed),
    ]


def _fmt(x) -> str:
    return f"{x:.12g}"


def result_rows(result: CampaignResult) -> list[dict]:
    """One row per checkpoint of a campaign."""
    rows = []
    snr_db = snr_linear_to_db(result.config.snr)
    for m in result.checkpoints:
        t = result.report(m)
        sap = result.stats(Rule.SAP, m) if Rule.SAP in result.rules else None
        casc = result.stats(Rule.CASCADED, m) if Rule.CASCADED in result.rules else None
        rows.append({
            "snr_db": snr_db,
            "m": m,
            "i_joint": t.i_joint,
            "i_detect": t.i_detect,
            "i_estimate": t.i_estimate,
            "i_emp_sap": sap.information if sap else math.nan,
            "i_emp_cascaded_detect": casc.detect_information if casc else math.nan,
            "i_emp_cascaded_estimate": casc.estimate_information if casc else math.nan,
            "ed_joint": t.ed_joint,
            "ed_emp": sap.entropy_deviation if sap else math.nan,
            "mc_std_err": t.mc_std_err,
        })
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([str(row["m"]) if k == "m" else _fmt(row[k]) for k in CSV_HEADER])
    return buf.getvalue()


def digest(data: bytes) -> str:
    """64-bit BLAKE2b checksum, hex."""
    return hashlib.blake2b(data, digest_size=8).hexdigest()


def run_manifest(config: SystemConfig, argv: list[str], csv_text: str) -> dict:
    return {
        "config": dataclasses.asdict(config),
        "version": __version__,
        "seed": config.seed,
        "command_line": " ".join(["radar-jde", *argv]),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        "digest": digest(csv_text.encode()),
    }


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def emit_results(results, fmt: str, out: str | None, config: SystemConfig, argv: list[str]) -> None:
    """Write a campaign (or list of campaigns) as CSV or JSON.

    CSV written to a file gets a ``<out>.manifest.json`` sidecar.
    Raises OSError when the destination cannot be written.
    """
    if isinstance(results, CampaignResult):
        results = [results]
    rows = [row for r in results for row in result_rows(r)]
    csv_text = rows_to_csv(rows)
    manifest = run_manifest(config, argv, csv_text)
    if fmt == "csv":
        _write(out, csv_text)
        if out:
            _write(out + ".manifest.json", json.dumps(manifest, indent=2) + "\n")
    else:
        doc = {"columns": list(CSV_HEADER), "rows": _json_safe(rows), "manifest": manifest}
        _write(out, json.dumps(doc, indent=2) + "\n")


def _write(out: str | None, text: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", newline="") as f:
        f.write(text)


def _emit_verdict(verdict, inv: Invocation, argv: list[str]) -> None:
    doc = {
        "verdict": _json_safe(verdict.to_dict()),
        "config": dataclasses.asdict(inv.config),
        "version": __version__,
        "command_line": " ".join(["radar-jde", *argv]),
    }
    _write(inv.out, json.dumps(doc, indent=2) + "\n")


def execute(inv: Invocation, argv: list[str]) -> int:
    if inv.command == "info":
        result = run_campaign(inv.config, inv.snapshots, rules=(Rule.SAP,), checkpoints=inv.checkpoints, workers=inv.workers)
        emit_results(result, inv.fmt, inv.out, inv.config, argv)
    elif inv.command == "run":
        result = run_campaign(inv.config, inv.snapshots, inv.rules, inv.checkpoints, inv.workers)
        emit_results(result, inv.fmt, inv.out, inv.config, argv)
    elif inv.command == "sweep":
        results = snr_sweep(inv.config, list(inv.sweep_db), inv.snapshots, inv.rules, inv.checkpoints, inv.workers)
        emit_results(results, inv.fmt, inv.out, inv.config, argv)
    else:
        verify = verify_joint_theorem if inv.command == "verify-joint" else verify_cascaded_theorem
        verdict = verify(inv.config, inv.snapshots, workers=inv.workers)
        _emit_verdict(verdict, inv, argv)
        return EXIT_OK if verdict.passed else EXIT_VERIFY_FAILED
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        inv = parse_config(argv)
        return execute(inv, argv)
    except UsageError as exc:
        print(f"radar-jde: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PreconditionError as exc:
        print(f"radar-jde: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"radar-jde: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
