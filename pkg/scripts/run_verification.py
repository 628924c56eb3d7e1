"""Run the full cross-check matrix and write a JSON report.

    python3 scripts/run_verification.py --tier full --report results/verify.json
"""

import argparse
import sys

from tqdiff import verify


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tier", choices=sorted(verify.TIERS), default="full")
    ap.add_argument("--only", nargs="+", choices=list(verify.CHECKS))
    ap.add_argument("--report", default="results/verify.json")
    args = ap.parse_args()
    report = verify.run_checks(args.tier, args.only)
    verify.emit_report(report, args.report)
    sys.exit(0 if report.passed else 1)


if __name__ == "__main__":
    main()
