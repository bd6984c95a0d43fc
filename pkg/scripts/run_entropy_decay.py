#!/usr/bin/env python3
"""Relative-entropy decay of the smooth 1D profile to T = 0.5.  Writes
out/entropy1d/entropy.csv and decay_fit.json with the fitted exponential
rate over the second half of the run."""

import pathlib
import sys

from smfv.cli import main

HERE = pathlib.Path(__file__).resolve().parent
CONFIG = HERE.parent / "configs" / "entropy1d.json"

if __name__ == "__main__":
    sys.exit(main(["entropy-decay", "--config", str(CONFIG), *sys.argv[1:]]))
