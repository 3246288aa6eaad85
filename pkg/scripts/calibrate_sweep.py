"""Calibration run for the eps-sweep tolerances (energy gap, peak drift, decay fit).

Runs the sweep on a preset and prints one line per eps with the numbers the
acceptance tolerances are compared against.  Pass ``--table`` to reuse a table
from build_table.py.
"""

import argparse
import json
import math
import time

from magnls.concentration import ReducedTable
from magnls.harness import SweepConfig, epsilon_sweep
from magnls.instance import PRESETS, preset
from magnls.io import dumps_json


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="quadratic-B", choices=sorted(PRESETS))
    ap.add_argument("--eps", default="0.1,0.07,0.05")
    ap.add_argument("--table")
    ap.add_argument("--R", type=float, default=10.0)
    ap.add_argument("--json", help="also write the report here")
    args = ap.parse_args()

    inst = preset(args.preset)
    eps = [float(e) for e in args.eps.split(",")]
    table = ReducedTable.load(args.table) if args.table else None
    t0 = time.perf_counter()
    rep = epsilon_sweep(inst, eps, SweepConfig(R=args.R), table)
    elapsed = time.perf_counter() - t0

    print(f"inf C = {rep.target_inf_C:.6f} at {rep.argmin_C}   ({elapsed:.1f} s)")
    print(f"{'eps':>6} {'energy':>10} {'gap':>10} {'drift/eps':>9} {'off-peak':>9} {'lambda':>7} {'r2':>6} it")
    for k, e in enumerate(rep.eps_values):
        en = rep.energies_scaled[k]
        drift = math.dist(rep.peaks[k], rep.argmin_C) / e
        print(f"{e:6.3f} {en:10.6f} {en / rep.target_inf_C - 1:+10.2e} {drift:9.2f} {rep.off_peak_sups[k]:9.2e} "
              f"{rep.decay_rates[k]:7.3f} {rep.decay_r2[k]:6.3f} {rep.iterations[k]}")
    for f in rep.failures:
        print(f"failed at eps = {f['eps']}: {f['error']}")
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(dumps_json(rep.to_dict()))


if __name__ == "__main__":
    main()
