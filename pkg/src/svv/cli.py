"""Command line entry point ``svv``.

Exit codes: 0 ok, 2 config error, 3 assumption violation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import load_config, normalise
from .errors import SVVError
from .harness import PRESETS, run, run_preset, validate_model


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="svv", description="Sandwiched Volterra volatility experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the experiment described by a TOML or JSON config")
    r.add_argument("config")
    _common(r)

    v = sub.add_parser("validate", help="check a config and the model assumptions without running")
    v.add_argument("config")

    pr = sub.add_parser("preset", help="run a named preset (" + ", ".join(PRESETS) + ")")
    pr.add_argument("name", choices=sorted(PRESETS))
    _common(pr)
    return p


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--paper-scale", action="store_true", help="use the full sample counts (slow)")
    p.add_argument("--workers", type=int, default=None, help="worker threads (env SVV_WORKERS)")
    p.add_argument("--out", default=None, help="output directory (env SVV_OUT_DIR)")


def _summary(report) -> str:
    lines = [f"wrote {len(report.manifest)} files to {report.out_dir} in {report.wall_time:.1f} s"]
    for e in report.manifest:
        lines.append(f"  {e['file']}")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            ec = normalise(load_config(args.config))
            checks = validate_model(ec)
            for c in checks:
                print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
            return 0 if all(c.passed for c in checks) else 3
        if args.command == "run":
            ec = normalise(load_config(args.config), args.paper_scale, args.workers, args.out)
            report = run(ec)
        else:
            report = run_preset(args.name, args.paper_scale, args.workers, args.out)
    except SVVError as exc:
        print(f"svv: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    print(_summary(report))
    scalars = {k: v for k, v in report.results.items() if isinstance(v, (int, float, str, type(None)))}
    if scalars:
        print(json.dumps(scalars, indent=2))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
