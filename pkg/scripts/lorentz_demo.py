"""Dipole force q grad V + mu grad B against grad C along a line through a preset.

At a critical point of both V and B the force vanishes; elsewhere grad C
should equal half the force.
"""

import argparse

import numpy as np

from magnls.concentration import build_reduced_table, table_grid
from magnls.harness import lorentz_balance
from magnls.instance import PRESETS, preset
from magnls.limiting import SolverConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="lorentz-critical", choices=sorted(PRESETS))
    ap.add_argument("--points", type=int, default=6)
    ap.add_argument("--b-max", type=float, default=1.5)
    ap.add_argument("--n", type=int, default=96)
    args = ap.parse_args()

    inst = preset(args.preset)
    cfg = SolverConfig(n=args.n)
    table = build_reduced_table(inst.p, table_grid(args.b_max), cfg)
    print(f"{'x':>6} {'y':>6} {'|F|':>10} {'|gradC|':>10} {'cos':>9} {'|gradC - F/2|/|F/2|':>20}")
    for t in np.linspace(0.0, 0.8, args.points):
        x = (float(t), float(0.6 * t))
        rep = lorentz_balance(inst, x, table, config=cfg)
        F, gC = np.array(rep.force), np.array(rep.grad_C)
        half = np.linalg.norm(F / 2)
        rel = np.linalg.norm(gC - F / 2) / half if half > 0 else float("nan")
        print(f"{x[0]:6.2f} {x[1]:6.2f} {np.linalg.norm(F):10.3e} {np.linalg.norm(gC):10.3e} {rep.cosine:9.5f} {rel:20.3e}")


if __name__ == "__main__":
    main()
