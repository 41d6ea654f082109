"""Command-line interface: train / resume / evaluate / sweep / landscape /
oracle-ac subcommands.

Exit code 0 on success; on failure a single machine-readable line
`error: {...json...}` goes to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import harness, landscape
from .harness import RunConfig, load_checkpoint, load_config
from .model import layer_shapes
from .pde_suite import allen_cahn_reference, make_grid, make_problem
from .precision import PRECISIONS

CONFIG_ENV = "PINNLAB_CONFIG"


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        nx, nt = text.lower().split("x")
        return int(nx), int(nt)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"grid must look like 51x51, got {text!r}") from None


def _parse_kv(text: str) -> tuple[str, float]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(
            f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), float(v)


def _base_config(args) -> RunConfig:
    cfg_path = os.environ.get(CONFIG_ENV)
    cfg = load_config(cfg_path) if cfg_path else RunConfig()
    if getattr(args, "pde", None):
        cfg.pde = args.pde
        cfg.pde_params = {}
    for k, v in getattr(args, "param", None) or []:
        cfg.pde_params[k] = v
    if getattr(args, "precision", None):
        cfg.precision = args.precision
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "width", None):
        cfg.width = args.width
    if getattr(args, "depth", None):
        cfg.depth = args.depth
    if getattr(args, "grid", None):
        cfg.nx, cfg.nt = args.grid
    if getattr(args, "outer_steps", None) is not None:
        cfg.outer_steps = args.outer_steps
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    return cfg


def cmd_train(args) -> int:
    cfg = _base_config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{cfg.pde}_{cfg.precision}_seed{cfg.seed}"
    harness.save_config(cfg, out / f"{stem}.ini")
    records, ck, stalled = harness.run(
        cfg, csv_path=out / f"{stem}.csv",
        checkpoint_path=out / f"{stem}.ckpt")
    last = records[-1] if records else None
    print(f"trained {len(records)} outer steps"
          + (" (stalled)" if stalled else ""))
    if last:
        print(f"final loss {last.loss_total:.3e} rmae {last.rmae:.4f} "
              f"rrmse {last.rrmse:.4f} phase {last.phase}")
    print(f"wrote {out / (stem + '.csv')} and {out / (stem + '.ckpt')}")
    return 0


def cmd_resume(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    src = Path(args.checkpoint)
    stem = f"{src.stem}_to_{args.precision}"
    out = src.parent
    records, ck2, stalled = harness.resume(
        ck, args.precision, args.steps,
        csv_path=out / f"{stem}.csv",
        checkpoint_path=out / f"{stem}.ckpt",
        allow_narrowing=args.allow_narrowing)
    last = records[-1] if records else None
    print(f"resumed for {len(records)} outer steps"
          + (" (stalled)" if stalled else ""))
    if last:
        print(f"final loss {last.loss_total:.3e} rmae {last.rmae:.4f} "
              f"rrmse {last.rrmse:.4f} phase {last.phase}")
    print(f"wrote {out / (stem + '.csv')} and {out / (stem + '.ckpt')}")
    return 0


def cmd_evaluate(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    nx, nt = args.grid if args.grid else (None, None)
    field_csv = args.out or str(Path(args.checkpoint).with_suffix(".field.csv"))
    mae, rmse = harness.evaluate(ck, nx, nt, field_csv=field_csv)
    print(f"rmae {mae!r} rrmse {rmse!r}")
    print(f"wrote {field_csv}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _base_config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    precisions = [p.strip() for p in args.precisions.split(",") if p.strip()]
    grid = []
    if args.param_grid:
        name, values = args.param_grid.split("=", 1)
        grid = [(name.strip(), float(v)) for v in values.split(",")]
    path = out / "sweep.csv"
    rows, _ = harness.sweep(cfg, precisions, grid, csv_path=path,
                            workers=args.workers)
    print(f"swept {len(rows)} cells; wrote {path}")
    return 0


def cmd_landscape(args) -> int:
    ck_a = load_checkpoint(args.checkpoint_a or args.checkpoint)
    cfg = ck_a.config
    problem = make_problem(cfg.pde, **cfg.pde_params)
    colloc = make_grid(problem, cfg.nx, cfg.nt)
    shapes = layer_shapes(cfg.depth, cfg.width)
    out = args.out or "landscape.csv"
    if args.checkpoint_b:
        ck_b = load_checkpoint(args.checkpoint_b)
        sl = landscape.interpolate_segment(
            ck_a.params, ck_b.params, args.points, problem, colloc, shapes)
    else:
        sl = landscape.slice_2d(ck_a.params, args.seed, args.extent,
                                args.points, problem, colloc, shapes)
    landscape.save_slice_csv(sl, out)
    print(f"wrote {out} ({sl.kind}, {sl.loss_values.size} samples)")
    return 0


def cmd_oracle_ac(args) -> int:
    problem = make_problem("allen_cahn")
    colloc = make_grid(problem, args.nx, args.nt)
    ref = allen_cahn_reference(colloc.xs, colloc.ts)
    with open(args.out, "w") as fh:
        fh.write("x,t,u\n")
        for j, t in enumerate(colloc.ts):
            for i, x in enumerate(colloc.xs):
                fh.write(f"{float(x)!r},{float(t)!r},{float(ref[j, i])!r}\n")
    print(f"wrote {args.out} ({colloc.ts.size}x{colloc.xs.size} grid)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pinnlab",
        description="Precision-switchable PINN training laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_run_flags(p):
        p.add_argument("--pde", choices=["convection", "reaction", "wave",
                                         "allen_cahn"])
        p.add_argument("--param", action="append", type=_parse_kv,
                       metavar="KEY=VAL")
        p.add_argument("--precision", choices=sorted(PRECISIONS))
        p.add_argument("--seed", type=int)
        p.add_argument("--width", type=int)
        p.add_argument("--depth", type=int)
        p.add_argument("--grid", type=_parse_grid, metavar="NXxNT")
        p.add_argument("--outer-steps", type=int, dest="outer_steps")
        p.add_argument("--out", metavar="DIR")

    p = sub.add_parser("train", help="train from a seeded initialization")
    add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("resume", help="continue a checkpoint, optionally "
                                      "under a different precision")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--precision", required=True, choices=sorted(PRECISIONS))
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--allow-narrowing", action="store_true",
                   dest="allow_narrowing")
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("evaluate", help="dense-grid metrics for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--grid", type=_parse_grid, metavar="NXxNT")
    p.add_argument("--out", metavar="CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="precision x parameter sweep")
    add_run_flags(p)
    p.add_argument("--precisions", required=True,
                   metavar="fp32,fp64")
    p.add_argument("--param-grid", dest="param_grid", metavar="beta=10,50")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("landscape", help="segment or 2-D landscape probe")
    p.add_argument("--checkpoint-a", dest="checkpoint_a")
    p.add_argument("--checkpoint-b", dest="checkpoint_b")
    p.add_argument("--checkpoint")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--extent", type=float, default=1.0)
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--out", metavar="CSV")
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("oracle-ac", help="export the Allen-Cahn reference")
    p.add_argument("--out", required=True, metavar="FILE")
    p.add_argument("--nx", type=int, default=101)
    p.add_argument("--nt", type=int, default=101)
    p.set_defaults(func=cmd_oracle_ac)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "landscape" and not (args.checkpoint_a
                                            or args.checkpoint):
        print("error: " + json.dumps(
            {"message": "landscape needs --checkpoint-a or --checkpoint"}),
            file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print("error: " + json.dumps(
            {"type": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
