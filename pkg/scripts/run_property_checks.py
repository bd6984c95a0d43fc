#!/usr/bin/env python3
"""Seeded structural property suite (matrix algebra, flux solves, Jacobian
vs finite differences, projections, mesh geometry).  Exit code 1 on any
failing property; report in out/check_report.json."""

import sys

from smfv.cli import main

if __name__ == "__main__":
    sys.exit(main(["check", *sys.argv[1:]]))
