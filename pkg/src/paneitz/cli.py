"""Command line: ``verify``, ``apply`` and ``catalog list``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import catalog, fields, harness
from .operators import OPERATORS, biharmonic_flat, cylinder_closed_form, paneitz4_apply, paneitz_apply, yamabe_apply


def _int_list(text: str) -> list:
    return [int(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paneitz", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run seeded verification suites")
    v.add_argument("--suite", default=None, help="jets, geometry, yamabe, paneitz, cylinder, flatness, mutation or all")
    v.add_argument("--dims", type=_int_list, default=None, help="comma-separated dimensions")
    v.add_argument("--points", type=int, default=None, help="sample points per case")
    v.add_argument("--seeds", default=None, help="a count, or a comma-separated list of seeds")
    v.add_argument("--tol", type=float, default=None, help="relative tolerance for identity checks")
    v.add_argument("--order", type=int, default=None, help="jet order (<= 4)")
    v.add_argument("--format", choices=("json", "text"), default=None)
    v.add_argument("--metric", action="append", default=None, help="catalog metric name (repeatable)")
    v.add_argument("--config", default=None, help="YAML/JSON config file")
    v.add_argument("--root-seed", type=int, default=None)
    v.add_argument("--no-timestamp", action="store_true", help="omit wall time and generation time")
    v.add_argument("--output", "-o", default=None, help="write the report here instead of stdout")

    a = sub.add_parser("apply", help="evaluate an operator at points")
    a.add_argument("--metric", default=None, help="catalog metric name")
    a.add_argument("--config", default=None, help="config file with a custom metric block")
    a.add_argument("--op", required=True, choices=OPERATORS)
    a.add_argument("--phi", required=True, help="field expression")
    a.add_argument("--points", type=int, default=1)
    a.add_argument("--at", action="append", default=None, help="comma-separated coordinates (repeatable)")
    a.add_argument("--seed", type=int, default=0, help="seed for sampled points and seeded metrics")

    c = sub.add_parser("catalog", help="builtin metrics")
    c.add_argument("action", choices=("list",))
    return parser


def _verify(args) -> int:
    data = {}
    if args.config:
        data = catalog.load_config(args.config)
    overrides = {
        "suite": args.suite,
        "dims": args.dims,
        "points": args.points,
        "seeds": args.seeds,
        "tol": args.tol,
        "order": args.order,
        "format": args.format,
        "metrics": args.metric,
        "root_seed": args.root_seed,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_timestamp:
        data["timestamp"] = False
    try:
        cfg = harness.config_from_mapping(data).validate()
    except (harness.ConfigError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    report = harness.run_suite(cfg)
    text = harness.to_json(report) if cfg.format == "json" else harness.to_text(report)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0 if harness.report_ok(report) else 1


def _apply_entry(args) -> catalog.CatalogEntry:
    if args.config:
        data = catalog.load_config(args.config)
        blocks = data.get("custom_metrics") or [data]
        return catalog.from_config(blocks[0])
    if args.metric:
        return catalog.get(args.metric, args.seed)
    if args.op == "cylinder-closed-form":
        return catalog.einstein_cylinder()
    raise ValueError("--metric or --config is required for this operator")


def _apply(args) -> int:
    try:
        entry = _apply_entry(args)
        n = entry.dim
        phi = fields.parse_expression(args.phi, n)
        if args.at:
            pts = np.array([[float(c) for c in at.split(",")] for at in args.at])
            if pts.shape[1] != n:
                raise ValueError(f"--at needs {n} coordinates")
        else:
            pts = entry.sample(np.random.default_rng(args.seed), args.points)
        rows = _evaluate(args.op, entry, phi, pts)
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"# {args.op} on {entry.name} (n={n}), phi = {args.phi}")
    for p, row in zip(pts, rows):
        coords = ",".join(f"{c:.6g}" for c in p)
        extra = "".join(f"  {k}={v:.12g}" for k, v in row.items() if k != "value")
        print(f"x=({coords})  value={row['value']:.12g}{extra}")
    return 0


def _evaluate(op: str, entry: catalog.CatalogEntry, phi, pts) -> list:
    g = entry.metric
    if op == "paneitz":
        res = paneitz_apply(g, phi, pts)
        parts = res.as_dict()
        return [{k: float(v[i]) for k, v in parts.items()} for i in range(len(pts))]
    if op == "yamabe":
        vals = yamabe_apply(g, phi, pts)
    elif op == "paneitz4":
        vals = paneitz4_apply(g, phi, pts)
    elif op == "cylinder-closed-form":
        if entry.dim != 4:
            raise ValueError("the cylinder closed form needs the 4-dimensional (t, chi, theta, phi) chart")
        vals = cylinder_closed_form(phi, pts)
    else:
        if not entry.signature:
            raise ValueError(f"{entry.name} has no constant signature; the flat biharmonic needs one")
        vals = biharmonic_flat(phi, pts, entry.signature)
    return [{"value": float(v)} for v in vals]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return _verify(args)
    if args.command == "apply":
        return _apply(args)
    for name, notes in catalog.listing():
        print(f"{name:<22} {notes}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
