"""Reproducible experiment runner.

Verbs: ``run`` executes a JSON-config suite and writes a versioned report,
``list-checks`` prints the registry, ``reproduce`` re-runs an embedded config
and diffs the numeric payloads.  Exit codes: 0 pass, 1 check failure,
2 config error, 3 reproduction mismatch.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

from . import __version__
from .models import build_model
from .registry import CHECKS, CheckResult, run_check

TOP_LEVEL_KEYS = {"model", "suite", "output_dir", "tolerances", "seedless"}
MODEL_PARAM_KEYS = {
    "shift": set(),
    "free_evolution": {"T", "Xi", "M"},
    "cocycle": {"m", "h_hat", "theta", "K"},
    "dilation": {"t", "dy", "K"},
}
TOL_RANGE = (1e-14, 1e-2)


class ConfigError(Exception):
    pass


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error at line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}")
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(cfg) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    model = cfg.get("model")
    if not isinstance(model, dict):
        raise ConfigError("config needs a 'model' object")
    name = model.get("name", model.get("model"))
    if name not in MODEL_PARAM_KEYS:
        raise ConfigError(f"unknown model {name!r}")
    extra = set(model) - MODEL_PARAM_KEYS[name] - {"name", "model"}
    if extra:
        raise ConfigError(f"unknown model parameters for {name}: {sorted(extra)}")
    suite = cfg.get("suite", [])
    if not isinstance(suite, list):
        raise ConfigError("'suite' must be a list of {op, params} entries")
    for entry in suite:
        if not isinstance(entry, dict) or set(entry) - {"op", "params"}:
            raise ConfigError(f"bad suite entry: {entry!r}")
        if entry.get("op") not in CHECKS:
            raise ConfigError(f"unknown check {entry.get('op')!r}")
    tols = cfg.get("tolerances", {})
    if not isinstance(tols, dict):
        raise ConfigError("'tolerances' must be an object")
    for key, val in tols.items():
        if not isinstance(val, (int, float)) or not (TOL_RANGE[0] <= val <= TOL_RANGE[1]):
            raise ConfigError(
                f"tolerance override {key}={val!r} outside [{TOL_RANGE[0]}, {TOL_RANGE[1]}]")
    if "seedless" in cfg and not isinstance(cfg["seedless"], bool):
        raise ConfigError("'seedless' must be a boolean")


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _model_config(cfg: dict) -> dict:
    model = dict(cfg["model"])
    model["model"] = model.pop("name", model.get("model"))
    return model


def _write_csv(path: Path, rows, chash: str) -> None:
    buf = io.StringIO()
    buf.write(f"# config_hash={chash}\r\n")
    if rows:
        fields = list(rows[0].keys())
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\r\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v
                             for k, v in row.items()})
    path.write_text(buf.getvalue(), encoding="utf-8")


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out or cfg.get("output_dir", "."))
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"config error: output dir not writable: {exc}", file=sys.stderr)
        return 2
    chash = config_hash(cfg)
    try:
        model = build_model(_model_config(cfg))
    except Exception as exc:
        print(f"check execution error in model construction: {exc}", file=sys.stderr)
        return 1
    tols = cfg.get("tolerances", {})
    results = []
    failed = None
    for entry in cfg.get("suite", []):
        name = entry["op"]
        params = dict(entry.get("params", {}))
        if args.jobs > 1 and CHECKS[name].parallel_cells:
            params["_jobs"] = args.jobs
        try:
            res = run_check(name, model, params, tols)
        except Exception as exc:
            print(f"check execution error in {name}: {exc}", file=sys.stderr)
            failed = name
            results.append(CheckResult(name=name, status="error",
                                       payload={"error": str(exc)},
                                       anchor=CHECKS[name].anchor))
            break
        results.append(res)
        if args.format in ("csv", "both") and res.rows:
            _write_csv(out_dir / f"{name}.csv", res.rows, chash)
    report = {
        "version": __version__,
        "config_hash": chash,
        "config": cfg,
        "checks": [
            {"name": r.name, "status": r.status, "anchor": r.anchor,
             "wall_ms": round(r.wall_ms, 3), "payload": r.payload}
            for r in results
        ],
    }
    if args.format in ("json", "both"):
        (out_dir / "report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True, default=float) + "\n",
            encoding="utf-8")
    for r in results:
        print(f"{r.status.upper():8s} {r.name}")
    if failed is not None:
        return 1
    return 0 if all(r.status in ("pass", "flagged") for r in results) else 1


def cmd_list_checks(args) -> int:
    width = max(len(n) for n in CHECKS)
    for name in CHECKS:           # registration order is the stable order
        print(f"{name:<{width}}  {CHECKS[name].anchor}")
    return 0


def _payload_mismatch(old, new, rtol: float) -> bool:
    if isinstance(old, dict) and isinstance(new, dict):
        if set(old) != set(new):
            return True
        return any(_payload_mismatch(old[k], new[k], rtol) for k in old)
    if isinstance(old, (int, float)) and isinstance(new, (int, float)):
        a, b = float(old), float(new)
        if a != a and b != b:     # both NaN
            return False
        return abs(a - b) > rtol * max(abs(a), abs(b), 1.0)
    if isinstance(old, list) and isinstance(new, list):
        if len(old) != len(new):
            return True
        return any(_payload_mismatch(x, y, rtol) for x, y in zip(old, new))
    return old != new


def cmd_reproduce(args) -> int:
    try:
        report = json.loads(Path(args.report).read_text(encoding="utf-8"))
        cfg = report["config"]
        old_checks = {c["name"]: c for c in report["checks"]}
        version = report["version"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"reproduction mismatch: corrupted report ({exc})", file=sys.stderr)
        return 3
    if version != __version__:
        print(f"reproduction mismatch: report version {version} != {__version__}",
              file=sys.stderr)
        return 3
    try:
        validate_config(cfg)
        model = build_model(_model_config(cfg))
    except (ConfigError, Exception) as exc:
        print(f"reproduction mismatch: embedded config failed ({exc})", file=sys.stderr)
        return 3
    tols = cfg.get("tolerances", {})
    rtol = float(tols.get("reproduce", 1e-9))
    bad = []
    for entry in cfg.get("suite", []):
        name = entry["op"]
        try:
            res = run_check(name, model, entry.get("params", {}), tols)
        except Exception as exc:
            bad.append((name, f"execution error: {exc}"))
            continue
        old = old_checks.get(name)
        if old is None:
            bad.append((name, "missing from report"))
            continue
        if old["status"] != res.status:
            bad.append((name, f"status {old['status']} -> {res.status}"))
        elif _payload_mismatch(old["payload"], res.payload, rtol):
            bad.append((name, "payload drifted beyond stored tolerance"))
    if bad:
        for name, why in bad:
            print(f"reproduction mismatch in {name}: {why}", file=sys.stderr)
        return 3
    print(f"reproduced {len(cfg.get('suite', []))} checks within tolerance")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="umourre",
        description="commutator-estimate laboratory for unitary operators")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute a config suite")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--format", choices=("csv", "json", "both"), default="both")
    p_run.set_defaults(fn=cmd_run)

    p_list = sub.add_parser("list-checks", help="print the check registry")
    p_list.set_defaults(fn=cmd_list_checks)

    p_rep = sub.add_parser("reproduce", help="re-run an embedded report config")
    p_rep.add_argument("report")
    p_rep.set_defaults(fn=cmd_reproduce)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
