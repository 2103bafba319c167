#!/usr/bin/env python3
"""Model-check the swap consensus, then re-check with each safety rule
ablated in turn. The baseline must be violation-free; every ablation must
find a violation (each rule is individually load-bearing).

    python scripts/ablation_matrix.py [rounds] [byzantine]
"""

import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from bftledger.modelcheck import ablation_matrix  # noqa: E402


def main() -> int:
    rounds = int(sys.argv[1]) if len(sys.argv) > 1 else 2
    byzantine = int(sys.argv[2]) if len(sys.argv) > 2 else 1
    started = time.time()
    results = ablation_matrix(max_round=rounds, byzantine=byzantine)
    ok = True
    for label, result in results.items():
        print(f"{label:12s} {result.summary()}")
        if label == "baseline":
            ok &= not result.violation
        else:
            ok &= result.violation
    print(f"total {time.time() - started:.1f}s")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
