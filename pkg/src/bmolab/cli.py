"""Command-line entry point: gen, reduce, ap, bmo, lower, upper, campaign.

Exit codes: 0 on success, 2 on configuration errors, 3 when an iterative
solver failed to converge (flagged results are still written).
"""

from __future__ import annotations

import argparse
import json
import sys

from .ap import ap_continuous, ap_dyadic
from .bmo import equivalence_report
from .campaign import emit_csv, load_config, run_campaign, _jsonable
from .commutator import lower_bound_experiment, upper_bound_experiment
from .errors import BmolabError, ConfigError
from .grid import GridSpec, Rectangle, make_family
from .reducing import bracket_constant, reduce_with_mode
from .weights import gen_from_descriptor, load_wfld, save_wfld

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOCONVERGE = 3


def _parse_floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t]


def _add_field_args(sub):
    sub.add_argument("--dims", default="1,1", help="axes per factor, e.g. 1,1")
    sub.add_argument("--depth", type=int, default=6, help="L with N=2^L cells per axis")


def _grid_from_args(args) -> GridSpec:
    dims = tuple(int(t) for t in args.dims.split(","))
    return GridSpec(dims, args.depth)


def cmd_gen(args) -> int:
    grid = _grid_from_args(args)
    desc = {"kind": args.kind}
    if args.alpha is not None:
        desc["alpha"] = _parse_floats(args.alpha)
    if args.kind == "power":
        desc["p"] = args.p
    if args.kind == "rotating":
        desc["lam"] = tuple(_parse_floats(args.lam))
        desc["windings"] = [int(t) for t in args.windings.split(",")]
    if args.kind in ("random_pd", "fourier_symbol", "checkerboard"):
        desc["d"] = args.d
    if args.kind in ("random_pd", "fourier_symbol"):
        desc["seed"] = args.seed
    if args.kind == "checkerboard":
        desc["block"] = args.block
    field = gen_from_descriptor(grid, desc)
    save_wfld(args.out, field)
    print(f"wrote {args.out}: kind={field.kind} d={field.d} grid={grid.dims}@L{grid.depth}")
    return EXIT_OK


def cmd_reduce(args) -> int:
    w = load_wfld(args.field)
    rect = Rectangle.from_json(args.region)
    op = reduce_with_mode(w, rect, args.p, args.mode)
    out = {
        "matrix": op.matrix.tolist(),
        "mode": op.mode,
        "residual": op.residual,
        "residual_left": op.residual_left,
        "residual_right": op.residual_right,
        "C_E": bracket_constant(w, rect, args.p),
        "converged": op.converged,
    }
    print(json.dumps(out, sort_keys=True, indent=1))
    return EXIT_OK if op.converged else EXIT_NOCONVERGE


def cmd_ap(args) -> int:
    w = load_wfld(args.field)
    fam = make_family(w.grid, args.family, sampled=args.sampled, seed=args.seed)
    base = ap_dyadic(w, args.p)
    out = {"ap_dyadic": base.value, "argmax": json.loads(base.argmax.to_json())}
    if args.family != "dyadic":
        cont = ap_continuous(w, fam, args.p)
        out["ap_continuous"] = cont.value
        out["ratio"] = cont.value / base.value
    text = json.dumps(out, sort_keys=True, indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text)
    return EXIT_OK


def cmd_bmo(args) -> int:
    b = load_wfld(args.symbol)
    u = load_wfld(args.u)
    v = load_wfld(args.v)
    fam = make_family(b.grid, args.family, sampled=args.sampled, seed=args.seed)
    rep = equivalence_report(b, u, v, args.p, fam, args.mode, not args.no_slices)
    out = {
        "values": _jsonable(rep.values),
        "ratios": _jsonable(rep.ratios),
        "argmax": _jsonable(rep.argmax),
        "degenerate": rep.degenerate,
        "mode": rep.mode,
        "family": rep.family,
        "p": rep.p,
    }
    text = json.dumps(out, sort_keys=True, indent=1)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text)
    else:
        print(text)
    return EXIT_OK


def cmd_bound(args, which: str) -> int:
    b = load_wfld(args.symbol)
    u = load_wfld(args.u)
    v = load_wfld(args.v)
    fam = make_family(b.grid, args.family, sampled=args.sampled, seed=args.seed)
    if which == "lower":
        rep = lower_bound_experiment(b, u, v, args.p, fam)
    else:
        rep = upper_bound_experiment(b, u, v, args.p, fam)
    out = {
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "ratio": rep.ratio,
        "p": rep.p,
        "degenerate": rep.degenerate,
        "detail": _jsonable(rep.detail),
    }
    if args.no_witness:
        out["detail"].pop("witnesses", None)
    text = json.dumps(out, sort_keys=True, indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text)
    return EXIT_OK


def cmd_campaign(args) -> int:
    cfg = load_config(args.config)
    report = run_campaign(cfg)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_json())
    else:
        print(report.to_json())
    if args.csv:
        emit_csv(report, args.csv)
    return EXIT_NOCONVERGE if any("not converged" in f for f in report.flags) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="bmolab",
        description="Numerical laboratory for two-matrix-weighted little BMO",
    )
    sub = top.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a weight/symbol field file")
    _add_field_args(g)
    g.add_argument("--kind", required=True,
                   choices=["power", "rotating", "random_pd", "checkerboard", "fourier_symbol", "constant"])
    g.add_argument("--alpha", help="per-axis exponents for power weights, e.g. 0.5,0.3")
    g.add_argument("--p", type=float, default=2.0)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--lam", default="1,10")
    g.add_argument("--windings", default="1,0")
    g.add_argument("--block", type=int, default=1)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen)

    r = sub.add_parser("reduce", help="reducing operator over a region")
    r.add_argument("--field", required=True)
    r.add_argument("--region", required=True, help='rectangle JSON {"axes": [[a,b],...], "split": n}')
    r.add_argument("--p", type=float, default=2.0)
    r.add_argument("--mode", default="john", choices=["john", "proxy", "exact_p2", "auto"])
    r.set_defaults(fn=cmd_reduce)

    a = sub.add_parser("ap", help="matrix A_p characteristics")
    a.add_argument("--field", required=True)
    a.add_argument("--p", type=float, default=2.0)
    a.add_argument("--family", default="dyadic", choices=["dyadic", "shifted", "sampled"])
    a.add_argument("--sampled", type=int, default=0)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out")
    a.set_defaults(fn=cmd_ap)

    b = sub.add_parser("bmo", help="little BMO norm variants and ratios")
    for name in ("symbol", "u", "v"):
        b.add_argument(f"--{name}", required=True)
    b.add_argument("--p", type=float, default=2.0)
    b.add_argument("--family", default="dyadic", choices=["dyadic", "shifted", "sampled"])
    b.add_argument("--sampled", type=int, default=0)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--mode", default="auto", choices=["auto", "john", "proxy", "exact_p2"])
    b.add_argument("--no-slices", action="store_true")
    b.add_argument("--report")
    b.set_defaults(fn=cmd_bmo)

    for which in ("lower", "upper"):
        s = sub.add_parser(which, help=f"{which}-bound commutator experiment")
        for name in ("symbol", "u", "v"):
            s.add_argument(f"--{name}", required=True)
        s.add_argument("--p", type=float, default=2.0)
        s.add_argument("--family", default="dyadic", choices=["dyadic", "shifted", "sampled"])
        s.add_argument("--sampled", type=int, default=0)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--no-witness", action="store_true")
        s.add_argument("--out")
        s.set_defaults(fn=lambda args, w=which: cmd_bound(args, w))

    c = sub.add_parser("campaign", help="run a config-driven experiment campaign")
    c.add_argument("config")
    c.add_argument("--out")
    c.add_argument("--csv")
    c.set_defaults(fn=cmd_campaign)
    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except BmolabError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
