#!/usr/bin/env python3
"""2D mixing demo on a 35x35 grid with strongly asymmetric couplings
(species 2 and 3 interdiffuse slowly).  Snapshots at t = 0, 8.5e-5, 1e-3.
Pass --config configs/blocks2d_70.json for the 70x70 variant."""

import pathlib
import sys

from smfv.cli import main

HERE = pathlib.Path(__file__).resolve().parent
CONFIG = HERE.parent / "configs" / "blocks2d.json"

if __name__ == "__main__":
    args = sys.argv[1:]
    if not any(a.startswith("--config") for a in args):
        args = ["--config", str(CONFIG), *args]
    sys.exit(main(["run", *args]))
