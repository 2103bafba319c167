#!/usr/bin/env python3
"""Run every shipped scenario and print its report; exit nonzero on any
failed audit."""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from bftledger.scenario import load_scenario, run_scenario  # noqa: E402

SCENARIOS = os.path.join(os.path.dirname(__file__), os.pardir, "scenarios")


def main() -> int:
    ok = True
    for fname in sorted(os.listdir(SCENARIOS)):
        config = load_scenario(os.path.join(SCENARIOS, fname))
        _run, report = run_scenario(config)
        print("=" * 60)
        print(report.to_text())
        ok &= report.all_passed
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
