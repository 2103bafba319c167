"""Command-line interface: run scenarios, audit runs, model-check the consensus.

Subcommands:
  run        execute a scenario file; write trace, snapshots, and a report
  audit      re-execute a scenario deterministically and print audit results
  modelcheck bounded exhaustive agreement check, optionally ablating rules
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import wire  # noqa: F401  (freeze wire tags before any encoding)
from .errors import ProtocolError
from .modelcheck import ablation_matrix, check_swap_agreement
from .scenario import load_scenario, run_scenario


def _write(path: str, data) -> None:
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode) as fh:
        fh.write(data)


def cmd_run(args) -> int:
    config = load_scenario(args.scenario)
    run, report = run_scenario(config, seed=args.seed)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write(os.path.join(args.out, "trace.bin"), run.sim.trace.to_bytes())
        for name, authority in run.sim.authorities.items():
            fname = f"snapshot_{name.replace(':', '_')}.txt"
            _write(os.path.join(args.out, fname), authority.snapshot())
        ext = "json" if args.format == "json" else "txt"
        body = report.to_json() if args.format == "json" else report.to_text()
        _write(os.path.join(args.out, f"report.{ext}"), body)
    print(report.to_json() if args.format == "json" else report.to_text(), end="")
    return 0 if report.all_passed else 1


def cmd_audit(args) -> int:
    config = load_scenario(args.scenario)
    _run, report = run_scenario(config, seed=args.seed)
    if args.format == "json":
        print(report.to_json())
    else:
        for result in report.audits:
            print(result.line())
            for violation in result.violations:
                print(f"  ! {violation}")
    return 0 if report.all_passed else 1


def cmd_modelcheck(args) -> int:
    if args.ablate == "all":
        results = ablation_matrix(max_round=args.rounds, byzantine=args.byzantine)
    else:
        disabled = frozenset() if args.ablate == "none" else frozenset(args.ablate)
        label = "baseline" if args.ablate == "none" else f"without_{args.ablate}"
        results = {label: check_swap_agreement(
            max_round=args.rounds, byzantine=args.byzantine, disabled_rules=disabled
        )}
    if args.format == "json":
        print(json.dumps(
            {k: {"violation": r.violation, "states": r.states} for k, r in results.items()},
            indent=2, sort_keys=True,
        ))
    else:
        for label, result in results.items():
            print(f"{label}: {result.summary()}")
    ok = True
    for label, result in results.items():
        if label.startswith("without_") and not result.violation:
            ok = False  # an ablated rule must be load-bearing
        if label == "baseline" and result.violation:
            ok = False
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bftledger",
        description="Sharded BFT ledger with one-shot swap consensus, assets, and auctions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("--scenario", required=True, help="path to a scenario JSON file")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--out", default=None, help="output directory for trace/snapshots/report")
    p_run.add_argument("--format", choices=("text", "json"), default="text")
    p_run.set_defaults(fn=cmd_run)

    p_audit = sub.add_parser("audit", help="re-run a scenario and print audits")
    p_audit.add_argument("--scenario", required=True)
    p_audit.add_argument("--seed", type=int, default=None)
    p_audit.add_argument("--format", choices=("text", "json"), default="text")
    p_audit.set_defaults(fn=cmd_audit)

    p_mc = sub.add_parser("modelcheck", help="bounded exhaustive agreement check")
    p_mc.add_argument("--rounds", type=int, default=2)
    p_mc.add_argument("--byzantine", type=int, default=1)
    p_mc.add_argument("--ablate", choices=("none", "a", "b", "c", "d", "all"), default="none")
    p_mc.add_argument("--format", choices=("text", "json"), default="text")
    p_mc.set_defaults(fn=cmd_modelcheck)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ProtocolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
