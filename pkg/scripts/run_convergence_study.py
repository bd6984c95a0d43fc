#!/usr/bin/env python3
"""Grid-refinement study: smooth profile, grids 16..128 vs a nested N=1024
reference at fixed dt.  Writes out/convergence1d/convergence.csv; expect
observed orders close to 2."""

import pathlib
import sys

from smfv.cli import main

HERE = pathlib.Path(__file__).resolve().parent
CONFIG = HERE.parent / "configs" / "convergence1d.json"

if __name__ == "__main__":
    sys.exit(main(["convergence", "--config", str(CONFIG), *sys.argv[1:]]))
