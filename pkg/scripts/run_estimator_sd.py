#!/usr/bin/env python3
"""Standard deviation of the biomass and cell-count growth-rate estimators
as a function of the horizon, at moderate rate variability (alpha = 0.3).

All horizons are evaluated on the same 50 simulated trees (a shorter
horizon is a prefix of a longer one), so the comparison is paired.
"""
import sys

from malthus.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "estimator_sd.csv"
    sys.exit(
        main(
            [
                "estimator-compare",
                "--alpha", "0.3",
                "--horizons", "6", "7", "8", "9", "10", "11", "12",
                "--m", "50",
                "--seed", "1",
                "--out", out,
            ]
        )
    )
