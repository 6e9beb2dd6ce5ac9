#!/usr/bin/env python3
"""Replay both bundled case studies against an in-process gateway."""

import sys

from roe_gate.sim import run_case_study


def main() -> int:
    failed = False
    for case in (1, 2):
        transcript = run_case_study(case)
        print(transcript.render())
        print()
        failed = failed or not transcript.ok
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
