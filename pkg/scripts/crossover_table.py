"""Table of the crossover degree k* over a grid of q and d.

k* is the first degree where |q|^k d^k beats (1 + delta) C_q^3 (k+1)^2 d^{k/2};
cells with q^2 d <= 1 have no crossover and print '-'.

    python scripts/crossover_table.py --delta 0.01
"""

import argparse
import sys

from qfock.witness import cq, crossover_k


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", type=float, nargs="+", default=[0.3, 0.5, 0.6, 0.7, 0.8, 0.9])
    ap.add_argument("--d", type=int, nargs="+", default=[2, 3, 4, 8, 16, 64])
    ap.add_argument("--delta", type=float, default=0.01)
    args = ap.parse_args(argv)

    print(f"{'q':>5} {'C_q':>10} " + " ".join(f"{'d=' + str(d):>8}" for d in args.d))
    for q in args.q:
        cells = []
        for d in args.d:
            cells.append(f"{crossover_k(q, d, args.delta):>8}" if q * q * d > 1 else f"{'-':>8}")
        print(f"{q:>5} {cq(q):10.5g} " + " ".join(cells))
    return 0


if __name__ == "__main__":
    sys.exit(main())
