"""Sweep F'(0) and the smoothness verdict over exponents r and weights psi.

    python3 scripts/baldomero_sweep.py [--orders 3] [--out sweep.csv]
"""

import argparse
import csv
import sys
import time

from sigmaspace.quad_smooth import BaldomeroSpec, baldomero_F, f_prime_zero_formula, smoothness_probe

R_VALUES = (0.25, 0.5, 1.0, 2.0, 3.0)
PSI = ("1", "1 + 0.3*sin(x)", "exp(0.5*x)", "2 + x - x^2", "1/(1 + x^2) + cos(3*x)")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--orders", type=int, default=3)
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    rows = []
    start = time.perf_counter()
    for r in R_VALUES:
        for psi in PSI:
            spec = BaldomeroSpec.from_text(r, psi)
            rep = smoothness_probe(lambda t: baldomero_F(spec, (), t), 0.0, max_order=args.orders)
            d1 = rep.estimate(1)
            est = 0.5 * (d1.left + d1.right)
            formula = f_prime_zero_formula(spec, ())
            rows.append((r, psi, est, formula, abs(est - formula) / formula, rep.verdict))
    elapsed = time.perf_counter() - start

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["r", "psi", "estimate", "formula", "rel_error", "verdict"])
    for row in rows:
        w.writerow([row[0], row[1], f"{row[2]:.12g}", f"{row[3]:.12g}", f"{row[4]:.2e}", row[5]])
    if args.out:
        out.close()
    worst = max(row[4] for row in rows)
    print(f"{len(rows)} cases in {elapsed:.1f}s, worst rel error {worst:.2e}, "
          f"min verdict C^{min(row[5] for row in rows)}", file=sys.stderr)


if __name__ == "__main__":
    main()
