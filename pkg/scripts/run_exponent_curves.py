#!/usr/bin/env python3
"""Growth exponent vs rate variability for a family of age-dependent
division rates B(a) = (a - 1)_+^beta, beta on a grid from 0 to 7.

Each curve is normalized by its own CV=0 anchor (lambda_reference column),
so the output plots directly as lambda/lambda_ref against CV.
"""
import sys

from malthus.cli import main

BETAS = ["0", "0.25", "0.5", "0.75", "1", "2", "3", "4", "5", "6", "7"]
ALPHAS = [f"{k / 10:g}" for k in range(1, 11)]

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "exponent_curves.csv"
    sys.exit(main(["age-curve", "--beta", *BETAS, "--lag", "1", "--alpha", *ALPHAS, "--out", out]))
