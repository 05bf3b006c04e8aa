"""Command line: renewal-pinning <command> [--config PATH] [--seed U64] [--out DIR] [--threads N]."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .config import COMMANDS, ConfigError, ExperimentConfig
from .runner import RUNNERS
from .verify import run_verify


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="renewal-pinning",
                                     description="Pinning models with renewal disorder.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, default=None, help="flat key=value file")
    parser.add_argument("--seed", type=str, default=None, help="unsigned 64-bit master seed")
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    return parser


def _plain(obj):
    """json default hook: numpy scalars become Python scalars."""
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write(path: Path, text: str) -> str:
    data = text.encode("utf-8")
    path.write_bytes(data)  # bytes keep LF line endings on every platform
    return _sha256(data)


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    text = args.config.read_text(encoding="utf-8") if args.config else ""
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.seed is not None:
        overrides["seed"] = args.seed
    return ExperimentConfig.from_text(text, args.command, overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    outputs: dict[str, str] = {}
    status = 0
    if cfg.command == "verify":
        report = run_verify(cfg["suite"], cfg.seed, cfg["inject_fault"], args.threads)
        name = "verify_report.json"
        outputs[name] = _write(out / name, _dumps(report))
        results = {"passed": report["passed"],
                   "failed": [c["name"] for c in report["checks"] if c["status"] != "pass"]}
        status = 0 if report["passed"] else 1
    else:
        try:
            run = RUNNERS[cfg.command](cfg, args.threads)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        name = cfg.command.replace("-", "_") + ".csv"
        outputs[name] = _write(out / name, run.csv_text())
        results = run.results
    manifest = {
        "command": cfg.command,
        "config": cfg.to_text(),
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "version": __version__,
        "outputs": outputs,
        "results": results,
    }
    _write(out / "manifest.json", _dumps(manifest))
    print(f"wrote {', '.join(sorted(outputs))} and manifest.json to {out}")
    if status:
        print("verification failed: " + ", ".join(results["failed"]), file=sys.stderr)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
