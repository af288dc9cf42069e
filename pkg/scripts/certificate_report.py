#!/usr/bin/env python3
"""Run every lemma certificate suite and print a summary table.

Usage:
    python3 scripts/certificate_report.py --out results/certificates [--seed N]
"""

import argparse
import json
import sys
import time
from pathlib import Path

from softbte.verify import SUITES, run_suite


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--suite", default="all",
                    help=f"one of {', '.join(sorted(SUITES))}, or 'all'")
    ap.add_argument("--out", type=Path, default=Path("results/certificates"))
    args = ap.parse_args()

    t0 = time.time()
    certificates = run_suite(args.suite, seed=args.seed)
    elapsed = time.time() - t0

    args.out.mkdir(parents=True, exist_ok=True)
    payload = {"suite": args.suite, "seed": args.seed,
               "certificates": [c.to_dict() for c in certificates]}
    (args.out / "certificates.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n")

    width = max(len(c.lemma_id) for c in certificates)
    for c in certificates:
        consts = " ".join(f"{k}={v:.4g}"
                          for k, v in sorted(c.fitted_constants.items()))
        flags = f" [{'; '.join(c.flags)}]" if c.flags else ""
        print(f"{c.lemma_id:<{width}s}  {c.verdict:<10s} {consts}{flags}")
    print(f"\n{len(certificates)} certificates in {elapsed:.1f}s "
          f"-> {args.out / 'certificates.json'}")
    return 0 if all(c.verdict == "pass" for c in certificates) else 3


if __name__ == "__main__":
    sys.exit(main())
