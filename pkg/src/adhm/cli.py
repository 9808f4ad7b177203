"""Command-line driver: constraint checks, transforms, convergence studies.

One binary with subcommands; every run is deterministic given its flags
(all randomness is seeded), and repeated runs produce byte-identical
output files.  Exit codes: 0 pass, 1 tolerance failure, 2 input error.
"""

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from adhm import fields
from adhm.boundary import (
    BoundaryData, GeneralTransform, KernelP, build_grid, mc_grid,
    constraint_residual_inf, mc_phi_errors, simple_example,
)
from adhm.finite import ADHMData, constraint_residual, gauge_potential
from adhm.linearized import linearized_potential, linearized_potential_quat, p_first_order
from adhm.serialize import ParseError, boundary_to_dict, load_data_file


@dataclass
class RunConfig:
    lattice_n: int = 9
    lattice_extent: float = 0.7
    fd_step: float = 1e-3
    tol: float = 1e-4
    out: str | None = None
    fmt: str = "csv"


def _parse_grid(spec):
    """--grid p:16,16,16 or mc:10000:3"""
    kind, _, rest = spec.partition(":")
    if kind == "p":
        counts = [int(c) for c in rest.split(",")]
        if len(counts) != 3:
            raise ParseError("product grid needs three counts, e.g. p:16,16,16")
        return build_grid(*counts)
    if kind == "mc":
        parts = rest.split(":")
        if len(parts) != 2:
            raise ParseError("Monte Carlo grid spec is mc:N:seed")
        return mc_grid(int(parts[0]), int(parts[1]))
    raise ParseError(f"unknown grid spec {spec!r}")


def _parse_lattice(spec):
    """--lattice 9:0.7"""
    parts = spec.split(":")
    if len(parts) != 2:
        raise ParseError("lattice spec is n:extent, e.g. 9:0.7")
    n, extent = int(parts[0]), float(parts[1])
    if extent > 0.9:
        raise ParseError("lattice extent must stay at or below 0.9")
    return n, extent


def _write_output(cfg, text_csv, obj_json):
    if cfg.out is None:
        return
    path = Path(cfg.out)
    path.write_text(text_csv if cfg.fmt == "csv" else obj_json)
    print(f"wrote {path}")


def cmd_constraint(args):
    loaded = load_data_file(args.input)
    if isinstance(loaded, ADHMData):
        residual = constraint_residual(loaded)
    else:
        data, kernel = loaded
        if kernel is None:
            kernel = KernelP.zero(data.grid)
        residual = constraint_residual_inf(data, kernel)
    ok = residual <= args.tol
    print(f"constraint residual = {residual:.6e}  tol = {args.tol:.1e}  "
          f"{'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def _evaluator_and_singularities(loaded):
    if isinstance(loaded, ADHMData):
        idx = np.arange(loaded.rank)
        # diagonal entries of -M are the candidate gauge singularities
        avoid = list(-loaded.M[idx, idx])
        return (lambda x: gauge_potential(loaded, x)), avoid, "finite"
    data, kernel = loaded
    gt = GeneralTransform(data, kernel)
    path = "general" if (kernel is not None and not kernel.is_zero) else "ansatz"
    return gt.potential, [], path


def cmd_transform(args):
    cfg = RunConfig(fd_step=args.fd_step, tol=args.tol, out=args.out, fmt=args.format)
    cfg.lattice_n, cfg.lattice_extent = _parse_lattice(args.lattice)
    loaded = load_data_file(args.input)
    evaluator, avoid, path = _evaluator_and_singularities(loaded)
    pts = fields.ball_lattice(cfg.lattice_n, cfg.lattice_extent,
                              avoid=avoid, h=cfg.fd_step,
                              avoid_margin=args.margin)
    sample = fields.sample_field(evaluator, pts, h=cfg.fd_step,
                                 keep_potential=args.potentials)
    _write_output(cfg, sample.to_csv(include_potential=args.potentials),
                  sample.to_json())
    ok = sample.max_sd_residual <= cfg.tol
    print(f"path = {path}  points = {len(sample.points)}  "
          f"skipped = {len(sample.skipped)}")
    print(f"max sd_residual = {sample.max_sd_residual:.6e}  "
          f"tol = {cfg.tol:.1e}  {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_converge(args):
    loaded = load_data_file(args.input)
    if isinstance(loaded, ADHMData):
        raise ParseError("convergence study needs boundary data")
    data, _ = loaded
    if not data.real_flag:
        raise ParseError("convergence study needs real boundary data")
    n_list = [int(n) for n in args.n_list.split(",")]
    points = fields.ball_lattice(3, 0.3)
    errors, slope = mc_phi_errors(data, n_list, args.seed, points)
    print("N        max|phi^N - phi|")
    for n, e in zip(n_list, errors):
        print(f"{n:<8d} {e:.6e}")
    print(f"log-log slope = {slope:.3f}")
    return 0


def cmd_linearized(args):
    cfg = RunConfig(out=args.out, fmt=args.format)
    cfg.lattice_n, cfg.lattice_extent = _parse_lattice(args.lattice)
    loaded = load_data_file(args.input)
    if isinstance(loaded, ADHMData):
        raise ParseError("linearized run needs boundary data")
    data, _ = loaded
    eps_list = [float(e) for e in args.eps_list.split(",")]

    test_pts = fields.ball_lattice(3, 0.25)[::9][:6]
    deviations = []
    for eps in eps_list:
        scaled = data.scaled(eps)
        kernel = p_first_order(scaled)
        gt = GeneralTransform(scaled, kernel)
        d = max(
            float(np.abs(gt.potential(x) - linearized_potential_quat(scaled, x)).max())
            for x in test_pts
        )
        deviations.append(d)
        print(f"eps = {eps:g}: max|A_full - A_lin| = {d:.6e}")
    ok = True
    for (e1, d1), (e2, d2) in zip(zip(eps_list, deviations),
                                  zip(eps_list[1:], deviations[1:])):
        ratio = d1 / d2
        expected = (e1 / e2) ** 4
        ok = ok and (0.7 * expected <= ratio <= 1.3 * expected)
        print(f"deviation ratio {e1:g}/{e2:g} = {ratio:.2f} "
              f"(quartic scaling predicts {expected:.1f})")

    pts = fields.ball_lattice(cfg.lattice_n, cfg.lattice_extent)
    base = data.scaled(eps_list[0])
    rows = [np.concatenate([x, linearized_potential(base, x).reshape(-1)])
            for x in pts]
    header = ["x1", "x2", "x3", "x4"] + [
        f"A{a}_{mu}" for a in range(1, 4) for mu in range(1, 5)
    ]
    csv_text = ",".join(header) + "\n" + "\n".join(
        ",".join(f"{v:.17g}" for v in row) for row in rows
    ) + "\n"
    obj_json = json.dumps(
        {"points": [list(map(float, x)) for x in pts],
         "A_abelian": [r[4:].reshape(3, 4).tolist() for r in rows]},
        sort_keys=True, indent=1)
    _write_output(cfg, csv_text, obj_json)
    print("quartic-order check:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_example_simple(args):
    grid = _parse_grid(args.grid)
    spec = args.lam if args.lam is not None else str(1.0 / (4.0 * np.pi ** 2))
    lams = [float(v) for v in spec.split(",")]
    print("lambda        kappa         rho")
    emitted = None
    for lam in lams:
        data, kernel, rho = simple_example(lam, grid)
        kappa = float(np.sqrt(2.0 * lam - 2.0 * np.pi ** 2 * lam ** 2))
        print(f"{lam:<13.6g} {kappa:<13.6g} {rho:<13.6g}")
        emitted = (data, lam)
    if args.out and emitted is not None:
        data, lam = emitted
        obj = boundary_to_dict(data, kernel_tag={"kind": "simple-example",
                                                 "lambda": lam})
        Path(args.out).write_text(json.dumps(obj, sort_keys=True))
        print(f"wrote {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="adhm",
        description="ADHM transforms on the unit ball with verification sweeps",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constraint-check", help="data reality-constraint residual")
    p.add_argument("input")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_constraint)

    p = sub.add_parser("transform", help="evaluate the field on a lattice")
    p.add_argument("input")
    p.add_argument("--lattice", default="9:0.7")
    p.add_argument("--fd-step", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--potentials", action="store_true",
                   help="include potential components in CSV output")
    p.add_argument("--margin", type=float, default=None,
                   help="clearance around declared singular points")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("converge-mc", help="Monte Carlo reduction convergence")
    p.add_argument("input")
    p.add_argument("--n-list", default="100,1000,10000")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("linearized", help="leading-order fields and order check")
    p.add_argument("input")
    p.add_argument("--eps-list", default="0.02,0.01")
    p.add_argument("--lattice", default="5:0.5")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_linearized)

    p = sub.add_parser("example-simple", help="closed-form example table and data file")
    p.add_argument("--lam", default=None,
                   help="comma-separated parameter values (default 1/(4 pi^2))")
    p.add_argument("--grid", default="p:12,12,12")
    p.add_argument("--out")
    p.set_defaults(func=cmd_example_simple)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
