"""Command-line front end: ``magnls {limiting,map,sweep,verify}``.

Exit codes: 0 success, 1 runtime or solver failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .battery import DEFAULT_TOLERANCES, invariant_battery
from .concentration import ReducedTable, build_reduced_table, required_b_range, scan_concentration
from .config import ConfigError, RunConfig, load
from .errors import MagnlsError, TableRangeError
from .harness import epsilon_sweep, table_for
from .io import dumps_json, write_csv, write_field_csv, write_json, write_pgm
from .limiting import LimitingSpec, charge_and_moment, default_grid, minimize_quotient

log = logging.getLogger("magnls")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _tol(text: str):
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad tolerance value in {text!r}") from exc


def _metadata(command: str) -> dict:
    return {"command": command, "version": __version__,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}


def _config(args) -> RunConfig:
    cfg = load(args.config) if args.config else RunConfig()
    if getattr(args, "preset", None):
        cfg.instance = {"preset": args.preset}
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    cfg.build_instance()
    return cfg


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands -------------------------------------------------------------------


def cmd_limiting(args) -> int:
    cfg = _config(args)
    if args.n is not None:
        cfg.limiting.n = args.n
    if args.p <= 2:
        raise ConfigError(f"exponent must satisfy p > 2, got p = {args.p}")
    if args.vstar <= 0:
        raise ConfigError(f"V* must be positive, got {args.vstar}")
    b_values = args.b if args.b is not None else [0.0, 0.25, 0.5]
    specs = [LimitingSpec(args.vstar, b, args.p) for b in b_values]
    solver = cfg.limiting.solver()
    out = _outdir(cfg)
    rows, records, failed = [], [], []
    for spec in specs:
        res = minimize_quotient(spec, default_grid(spec, solver.n), solver, cfg.seed)
        rec = res.record()
        if res.converged:
            cm = charge_and_moment(res)
            rec.update(q=cm.q, mu=cm.mu)
        else:
            rec.update(q=float("nan"), mu=float("nan"))
            failed.append(spec.b_star)
            log.error("limiting solve failed at node (V*=%g, b=%g): residual %.3e",
                      spec.v_star, spec.b_star, res.residual)
        records.append(rec)
        rows.append([spec.v_star, spec.b_star, spec.p, res.energy, res.s_min, rec["q"], rec["mu"],
                     res.residual, int(res.converged), res.iterations])
    write_csv(out / "table.csv",
              ["v_star", "b", "p", "energy", "s_min", "q", "mu", "residual", "converged", "iterations"], rows)
    # reduced table e(b/V*) = E(V*, b) / V*^(2/(p-2)), sorted by |b|
    v, p = args.vstar, args.p
    reduced = sorted({abs(r["b_star"]) / v: r["energy"] / v ** (2 / (p - 2)) for r in records}.items())
    if not failed:
        ReducedTable(p, np.array([b for b, _ in reduced]), np.array([e for _, e in reduced]),
                     tuple(records)).save(out / "table.json")
    write_json(out / "limiting.json", {"meta": _metadata("limiting"), "records": records,
                                       "failed_nodes": failed})
    if failed:
        print(f"limiting solve failed at b = {', '.join(f'{b:g}' for b in failed)} (V* = {v:g})",
              file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(rows)} rows to {out / 'table.csv'}")
    return EXIT_OK


def _load_table(path, instance, cfg) -> ReducedTable:
    if not path:
        return table_for(instance, cfg.map.resolution, cfg.limiting.solver(), cfg.limiting.b_step, cfg.seed)
    try:
        table = ReducedTable.load(path)
    except OSError as exc:
        raise ConfigError(f"cannot read table {path}: {exc.strerror}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path} is not a reduced table: {exc}") from exc
    if table.p != instance.p:
        raise ConfigError(f"table {path} was built for p = {table.p:g}, the instance has p = {instance.p:g}")
    return table


def cmd_map(args) -> int:
    cfg = _config(args)
    if args.resolution is not None:
        if args.resolution < 8:
            raise ConfigError("scan resolution must be at least 8 per axis")
        cfg.map.resolution = args.resolution
    if args.table is not None:
        cfg.map.table = args.table
    instance = cfg.build_instance()
    table = _load_table(cfg.map.table, instance, cfg)
    lo, hi = required_b_range(instance, cfg.map.resolution)
    if not (table.covers(lo) and table.covers(hi)):
        raise TableRangeError(
            f"table covers |b| in [{table.b[0]:g}, {table.b[-1]:g}] but the map needs [{lo:g}, {hi:g}]",
            required=(lo, hi),
        )
    cmap = scan_concentration(instance, cfg.map.resolution, table)
    out = _outdir(cfg)
    write_csv(out / "cmap.csv", ["x", "y", "V", "B", "C", "on_boundary"],
              zip(cmap.sample_points[:, 0], cmap.sample_points[:, 1], cmap.V, cmap.B, cmap.values,
                  cmap.on_boundary.astype(int)))
    if cmap.shape is not None:
        write_pgm(out / "cmap.pgm", cmap.values.reshape(cmap.shape))
    record = cmap.record()
    record["table_range"] = list(table.b_range)
    record["required_b_range"] = [lo, hi]
    write_json(out / "map.json", {"meta": _metadata("map"), "instance": instance.to_dict(),
                                  "resolution": cfg.map.resolution, "map": record})
    print(f"argmin C = {cmap.argmin_value:.6f} at ({cmap.argmin_point[0]:g}, {cmap.argmin_point[1]:g}); "
          f"boundary hypothesis {'holds' if cmap.boundary_hypothesis else 'fails'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.eps is not None:
        cfg.sweep.eps = args.eps
        cfg.sweep.__post_init__()
    if args.table is not None:
        cfg.map.table = args.table
    instance = cfg.build_instance()
    table = _load_table(cfg.map.table, instance, cfg)
    sc = cfg.sweep.sweep_config(cfg.limiting, cfg.map.resolution, cfg.seed)
    report = epsilon_sweep(instance, cfg.sweep.eps, sc, table)
    out = _outdir(cfg)
    for eps, sol in zip(report.eps_values, report.solutions):
        if sol is not None:
            stem = f"field_eps{eps:g}"
            write_field_csv(out / f"{stem}.csv", sol.u)
            write_pgm(out / f"{stem}.pgm", np.abs(sol.u.values))
    write_json(out / "sweep.json", {"meta": _metadata("sweep"), "config": cfg.to_dict(),
                                    "instance": instance.to_dict(), "report": report.to_dict()})
    for eps, e, peak, ok in zip(report.eps_values, report.energies_scaled, report.peaks, report.converged):
        print(f"eps={eps:g}  energy_scaled={e:.6f}  peak=({peak[0]:g}, {peak[1]:g})  converged={ok}")
    if not report.ok:
        for f in report.failures:
            print(f"eps={f['eps']:g} failed: {f['error']}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _config(args)
    tolerances = dict(cfg.verify.tolerances)
    for name, value in args.tol or []:
        if name not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown invariant {name!r}; choose from {sorted(DEFAULT_TOLERANCES)}")
        tolerances[name] = value
    cfg.verify.tolerances = tolerances
    report = invariant_battery(cfg.verify.battery(cfg.seed))
    report["meta"] = _metadata("verify")
    if args.json:
        sys.stdout.write(dumps_json(report))
    else:
        for e in report["invariants"]:
            rel = "<=" if e["sense"] == "max" else ">="
            print(f"{'PASS' if e['passed'] else 'FAIL'}  {e['name']:<28} {e['measured']:.3e} {rel} {e['tolerance']:.3e}")
        if report["failed"]:
            print("violated: " + ", ".join(report["failed"]))
    if args.out:
        write_json(_outdir(cfg) / "verify.json", report)
    return EXIT_OK if report["all_passed"] else EXIT_RUNTIME


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="magnls", description="Semiclassical magnetic NLS workbench.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, instance=True):
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", help="output directory (default: config output_dir)")
        if instance:
            p.add_argument("--preset", help="named instance instead of the configured one")

    p = sub.add_parser("limiting", help="limiting groundstate energies E(V*, b)")
    common(p, instance=False)
    p.add_argument("--vstar", type=float, default=1.0, help="constant potential V* (default 1)")
    p.add_argument("--b", type=_floats, help="comma-separated field values (default 0,0.25,0.5)")
    p.add_argument("--p", type=float, default=4.0, help="nonlinearity exponent, p > 2 (default 4)")
    p.add_argument("--n", type=int, help="interior nodes per axis")
    p.set_defaults(func=cmd_limiting)

    p = sub.add_parser("map", help="concentration function C on the concentration set")
    common(p)
    p.add_argument("--table", help="reduced table JSON from `limiting` (default: build one)")
    p.add_argument("--resolution", type=int, help="samples per axis, at least 8")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("sweep", help="spike solutions along decreasing eps")
    common(p)
    p.add_argument("--eps", type=_floats, help="comma-separated decreasing eps values")
    p.add_argument("--table", help="reduced table JSON (default: build one)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the invariant battery")
    common(p, instance=False)
    p.add_argument("--json", action="store_true", help="print the machine-readable report")
    p.add_argument("--tol", type=_tol, action="append", metavar="NAME=VALUE",
                   help="override an invariant tolerance (repeatable)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TableRangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MagnlsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
