#!/usr/bin/env python3
"""Reference values of the symmetric stable density by direct Fourier inversion.

p(t, x) = (1/pi) int_0^U cos(u x) exp(-t c u^alpha) du, composite Simpson on a
uniform frequency grid of 10^6 + 1 nodes, U chosen so that exp(-t c U^alpha) < 1e-30.
Writes CSV (alpha, t, x_shifted, value, oracle_tag)."""
import csv
import sys

import numpy as np


def density(alpha, t, c, xs, n=1_000_000):
    U = (70.0 / (t * c)) ** (1.0 / alpha)
    u = np.linspace(0.0, U, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= (U / n) / 3.0
    damp = np.exp(-t * c * u**alpha) * w
    return [float(np.dot(np.cos(u * x), damp) / np.pi) for x in xs]


def main(path):
    xs = [0.0, 0.1, 0.5, 1.0, 2.0, 3.5, 5.0, 8.0]
    rows = []
    for alpha in (1.5, 0.7):
        for t in (0.25, 1.0):
            for x, v in zip(xs, density(alpha, t, 1.0, xs)):
                rows.append((alpha, t, x, v, "fourier_simpson_1e6"))
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\r\n")
        w.writerow(["alpha", "t", "x_shifted", "value", "oracle_tag"])
        for r in rows:
            w.writerow([repr(r[0]), repr(r[1]), repr(r[2]), repr(r[3]), r[4]])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data/golden_stable.csv")
