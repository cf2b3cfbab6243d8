"""Truncation study: restricted and tensor norms as the level cap N grows.

Both are certified lower bounds of their untruncated values and should be
nondecreasing in N.

    python scripts/truncation_convergence.py --q 0.5 --d 2 --k 1 2 --Nmax 6
"""

import argparse
import sys
import time

from threadpoolctl import threadpool_limits

from qfock import TruncatedFock
from qfock.witness import nou_bound, restricted_witness_norm, tensor_min_norm


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", type=float, default=0.5)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--k", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--Nmax", type=int, default=6)
    args = ap.parse_args(argv)

    q, d = args.q, args.d
    with threadpool_limits(1):
        for k in args.k:
            print(f"k={k}  identity q^k d^k = {q**k * d**k:.6g}  Khintchine bound = {nou_bound(q, k, d):.6g}")
            print(f"{'N':>3} {'restricted':>12} {'tensor':>12} {'sec':>7}")
            for N in range(k, args.Nmax + 1):
                t0 = time.perf_counter()
                tens = tensor_min_norm(TruncatedFock(d, N, q), k, d)
                restr = float("nan")
                if N >= 2 * k + 1:
                    restr = restricted_witness_norm(TruncatedFock(d + 1, N, q), k, d)
                print(f"{N:>3} {restr:12.6g} {tens:12.6g} {time.perf_counter() - t0:7.2f}")
            print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
