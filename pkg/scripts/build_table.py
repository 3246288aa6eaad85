"""Build and save the reduced table e(b) for a preset's concentration map.

    python scripts/build_table.py --preset quadratic-B --out table.json
"""

import argparse
import time

from magnls.harness import table_for
from magnls.instance import PRESETS, preset
from magnls.limiting import SolverConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--preset", default="quadratic-B", choices=sorted(PRESETS))
    ap.add_argument("--resolution", type=int, default=41)
    ap.add_argument("--step", type=float, default=0.25)
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--out", default="table.json")
    args = ap.parse_args()

    t0 = time.perf_counter()
    table = table_for(preset(args.preset), args.resolution, SolverConfig(n=args.n), args.step)
    table.save(args.out)
    print(f"{len(table.b)} nodes on |b| in [{table.b[0]:g}, {table.b[-1]:g}], "
          f"max jump {table.relative_jumps().max():.4f}, {time.perf_counter() - t0:.1f} s -> {args.out}")
    for b, e in zip(table.b, table.e):
        print(f"  b = {b:7.4f}   e = {e:.6f}")


if __name__ == "__main__":
    main()
