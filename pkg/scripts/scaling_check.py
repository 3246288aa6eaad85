"""Two-solve scaling check for the limiting energy.

Compares E(lam^2 V, lam^k b) with lam^2 E(V, b) for k = 1 and k = 2.  With the
field reduced as C = V e(B/V), only k = 2 is an exact symmetry of the problem.
"""

import argparse

from magnls.limiting import LimitingSpec, SolverConfig, minimize_quotient


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--v", type=float, default=1.0)
    ap.add_argument("--b", type=float, default=0.5)
    ap.add_argument("--lam", type=float, default=2.0)
    ap.add_argument("--n", type=int, default=128)
    args = ap.parse_args()

    cfg = SolverConfig(n=args.n)
    base = minimize_quotient(LimitingSpec(args.v, args.b), config=cfg).energy
    print(f"E({args.v:g}, {args.b:g}) = {base:.8f}")
    for k in (1, 2):
        v, b = args.lam**2 * args.v, args.lam**k * args.b
        e = minimize_quotient(LimitingSpec(v, b), config=cfg).energy
        print(f"E({v:g}, {b:g}) = {e:.8f}   ratio to lam^2 E = {e / (args.lam**2 * base):.8f}   (b scaled by lam^{k})")


if __name__ == "__main__":
    main()
