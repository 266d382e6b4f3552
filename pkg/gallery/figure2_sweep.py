"""Ensemble size against regret on the 50-arm MAB preset.

Runs the exact and SGD oracles over the M grid, grid-searching beta (and the
SGD learning rate) per M, and writes a CSV, an SVG and a metadata file.  The
full setting (100 replicates, T = 10^4) takes a few minutes; ``--quick``
shrinks it to a smoke run.

    python gallery/figure2_sweep.py --quick
"""

import argparse
import sys

from acbandit import cli

ap = argparse.ArgumentParser()
ap.add_argument("--quick", action="store_true")
ap.add_argument("--out-dir", default="figure2_out")
ap.add_argument("-j", "--workers", default="1")
args = ap.parse_args()

argv = ["figure2", "--out-dir", args.out_dir, "-j", args.workers]
if args.quick:
    argv += ["--replicates", "10", "--horizon", "2000", "--m-grid", "1,4,16"]
sys.exit(cli.main(argv))
