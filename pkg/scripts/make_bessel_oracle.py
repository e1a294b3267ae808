"""Regenerate tests/data/bessel_oracle.csv with mpmath at 50 digits.

Columns: function, order, x, value, scaled.  ``scaled = 1`` rows hold
exp(x) K_m(x); ``IK`` rows hold the product I_m(x) K_m(x).

Usage: python3 scripts/make_bessel_oracle.py [output.csv]
"""

import csv
import sys
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50

X_PLAIN = [1e-6, 1e-4, 1e-3, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0,
           7.5, 10.0, 20.0, 50.0, 100.0, 250.0, 600.0]
X_SCALED = [750.0, 1000.0, 5000.0, 1e5]
IK_CASES = [(0, 0.01), (0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0), (4, 1.0), (4, 10.0),
            (8, 0.5), (16, 2.0), (32, 40.0), (64, 1.0), (128, 100.0), (256, 0.01), (256, 300.0)]


def rows():
    for x in X_PLAIN:
        for m in (0, 1):
            yield "K", m, x, mp.besselk(m, x), 0
        yield "I", 0, x, mp.besseli(0, x), 0
    for x in X_SCALED:
        for m in (0, 1):
            yield "K", m, x, mp.exp(x) * mp.besselk(m, x), 1
    for m, x in IK_CASES:
        yield "IK", m, x, mp.besseli(m, x) * mp.besselk(m, x), 0


def main(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["function", "order", "x", "value", "scaled"])
        for f, m, x, v, s in rows():
            w.writerow([f, m, repr(float(x)), mp.nstr(v, 20, min_fixed=-1, max_fixed=-1), s])


if __name__ == "__main__":
    default = Path(__file__).resolve().parent.parent / "tests" / "data" / "bessel_oracle.csv"
    main(sys.argv[1] if len(sys.argv) > 1 else default)
