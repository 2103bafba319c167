#!/usr/bin/env python3
"""Agreement fuzzing: randomized adversarial swap schedules.

    python scripts/fuzz_swaps.py [runs] [base_seed]
"""

import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from bftledger.fuzz import run_fuzz  # noqa: E402


def main() -> int:
    runs = int(sys.argv[1]) if len(sys.argv) > 1 else 200
    base_seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    started = time.time()
    summary = run_fuzz(runs=runs, base_seed=base_seed)
    print(f"{summary.line()} in {time.time() - started:.1f}s")
    for seed, violations in summary.agreement_violations:
        print(f"  seed {seed}: {violations}")
    return 0 if not summary.agreement_violations else 1


if __name__ == "__main__":
    sys.exit(main())
