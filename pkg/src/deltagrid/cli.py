"""Command-line front end.

Subcommands:
  gen     build a named set or pencil configuration and write it out
  run     run an experiment and write csv/svg/summary artifacts
  verify  run an experiment, print assertions, write nothing
  fit     fit a growth exponent through two columns of a CSV file

Exit codes: 0 all declared assertions pass, 1 an assertion failed,
2 usage error (unknown experiment, bad parameter, malformed input).

Parameters arrive as positional key=value tokens, optionally seeded
from a flat key=value config file (--config); the flags --m, --sigma,
--const, --seed are shorthands for the parameters of the same name.
Later sources win: config file, then flags, then key=value tokens.
"""

from __future__ import annotations

import argparse
import csv
import sys
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .construct import (
    CantorSpec,
    ap_set,
    cantor_set,
    collinear_tip_config,
    gp_set,
    noncollinear_three_config,
    product_pencils,
)
from .errors import DeltaGridError, DomainError
from .experiments import ExperimentConfig, run, run_experiment, summary_text
from .grid import gridset_to_text, load_gridset
from .radial import exponent_fit
from .tubes import intersection_measure, rasterize_pencil

__all__ = ["main"]


def _parse_kv(tokens: Sequence[str]) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for tok in tokens:
        if "=" not in tok:
            raise DomainError(f"expected key=value, got {tok!r}")
        key, val = tok.split("=", 1)
        if not key:
            raise DomainError(f"empty key in {tok!r}")
        out[key] = val
    return out


def _read_config(path: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for raw in Path(path).read_text(encoding="ascii").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"config line without '=': {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _gather_params(args) -> Dict[str, str]:
    params: Dict[str, str] = {}
    if getattr(args, "config", None):
        params.update(_read_config(args.config))
    for flag in ("m", "sigma", "const", "seed"):
        v = getattr(args, flag, None)
        if v is not None:
            params[flag] = v
    params.update(_parse_kv(args.params))
    return params


# ----------------------------------------------------------------------
# gen


def _pencil_config(kind: str, params: Dict[str, str]):
    if kind == "collinear":
        n = int(params.pop("n", "4"))
        m = int(params.pop("m", "6"))
        pens = collinear_tip_config(n, m)
        names = ("vertical", "horizontal", "diagonal", "antidiagonal")
        window = ((Fraction(0), Fraction(0)), (Fraction(1), Fraction(1)))
        return pens, names, m, window
    if kind == "noncollinear":
        n = int(params.pop("n", "4"))
        m = int(params.pop("m", "6"))
        pens = noncollinear_three_config(n, m)
        names = ("cone", "vertical", "horizontal")
        window = ((Fraction(0), Fraction(0)), (Fraction(1), Fraction(1)))
        return pens, names, m, window
    a_path = params.pop("a", None)
    if a_path is None:
        raise DomainError("gen product needs a=<gridset file> for the base set")
    a = load_gridset(a_path)
    pens = product_pencils(a)
    names = ("vertical", "horizontal", "origin", "corner")
    window = ((a.lo, a.lo), (a.hi, a.hi))
    return pens, names, a.m, window


def _cmd_gen(args) -> int:
    params = _gather_params(args)
    kind = args.kind
    if kind in ("cantor", "ap", "gp"):
        if kind == "cantor":
            digits = tuple(int(t) for t in params.pop("digits", "0,3").split(","))
            spec = CantorSpec(
                int(params.pop("b", "2")), int(params.pop("ell", "4")),
                int(params.pop("d", "4")), digits)
            s = cantor_set(spec)
        elif kind == "ap":
            s = ap_set(
                int(params.pop("n", "16")), int(params.pop("gap", "1")),
                int(params.pop("m", "8")), start=int(params.pop("start", "0")))
        else:
            s = gp_set(
                Fraction(params.pop("ratio", "1/2")), int(params.pop("count", "6")),
                int(params.pop("m", "12")), first=Fraction(params.pop("first", "1/4")))
        if params:
            raise DomainError(f"unknown parameter(s): {', '.join(sorted(params))}")
        text = gridset_to_text(s)
        if args.out:
            Path(args.out).write_text(text, encoding="ascii")
            print(f"wrote {args.out} ({s.count} cells at m={s.m})")
        else:
            sys.stdout.write(text)
        return 0

    if kind in ("collinear", "noncollinear", "product"):
        pens, names, m, window = _pencil_config(kind, params)
        if params:
            raise DomainError(f"unknown parameter(s): {', '.join(sorted(params))}")
        if not args.out:
            raise DomainError(f"gen {kind} writes several files; pass --out DIR")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rasters = []
        for name, pen in zip(names, pens):
            r = rasterize_pencil(pen, m, lo=window[0], hi=window[1])
            rasters.append(r)
            (out / f"pencil_{name}.txt").write_text(gridset_to_text(r), encoding="ascii")
        meas = intersection_measure(rasters)
        lines = [f"configuration: {kind}"]
        lines.extend(
            f"{name}: {pen.ntubes} tubes, radius {pen.radius}, {r.count} cells"
            for name, pen, r in zip(names, pens, rasters))
        lines.append(f"intersection measure: {meas}")
        (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="ascii")
        print(f"wrote {len(pens)} pencil rasters to {out}; intersection measure {meas}")
        return 0

    raise DomainError(f"unknown generator {kind!r}")


# ----------------------------------------------------------------------
# run / verify


def _print_result(result) -> int:
    sys.stdout.write(summary_text(result))
    return 0 if result.ok else 1


def _cmd_run(args) -> int:
    config = ExperimentConfig(args.experiment, _gather_params(args), args.out)
    result, paths = run(config)
    for p in paths:
        print(f"wrote {p}")
    return _print_result(result)


def _cmd_verify(args) -> int:
    result = run_experiment(args.experiment, _gather_params(args))
    return _print_result(result)


# ----------------------------------------------------------------------
# fit


def _cmd_fit(args) -> int:
    with open(args.csv, newline="", encoding="ascii") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DomainError(f"{args.csv} has no header row")
        for col in (args.x, args.y):
            if col not in reader.fieldnames:
                raise DomainError(
                    f"no column {col!r} in {args.csv}; have {', '.join(reader.fieldnames)}")
        pts = []
        for row in reader:
            try:
                pts.append((Fraction(row[args.x]), float(Fraction(row[args.y]))))
            except (ValueError, ZeroDivisionError) as exc:
                raise DomainError(f"non-numeric row in {args.csv}: {row!r}") from exc
    fit = exponent_fit(pts)
    print(f"points={len(pts)} slope={fit.slope:.12g} "
          f"intercept={fit.intercept:.12g} residual={fit.residual:.12g}")
    return 0


# ----------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="deltagrid",
        description="grid-set experiments: generators, named experiments, exponent fits")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, with_out=True):
        p.add_argument("params", nargs="*", metavar="key=value",
                       help="experiment parameters")
        p.add_argument("--config", help="flat key=value parameter file")
        p.add_argument("--m", help="shorthand for the m= parameter")
        p.add_argument("--sigma", help="shorthand for the sigma= parameter")
        p.add_argument("--const", help="shorthand for the const= parameter")
        p.add_argument("--seed", help="shorthand for the seed= parameter")
        if with_out:
            p.add_argument("--out", help="output file or directory")

    g = sub.add_parser("gen", help="write a named set or pencil configuration")
    g.add_argument("kind", choices=("cantor", "ap", "gp", "collinear", "noncollinear", "product"))
    common(g)
    g.set_defaults(fn=_cmd_gen)

    r = sub.add_parser("run", help="run an experiment and write artifacts")
    r.add_argument("experiment")
    common(r)
    r.set_defaults(fn=_cmd_run)

    v = sub.add_parser("verify", help="run an experiment without writing artifacts")
    v.add_argument("experiment")
    common(v, with_out=False)
    v.set_defaults(fn=_cmd_verify)

    f = sub.add_parser("fit", help="fit an exponent through two CSV columns")
    f.add_argument("csv")
    f.add_argument("--x", required=True, help="scale column (r or delta)")
    f.add_argument("--y", required=True, help="count column")
    f.set_defaults(fn=_cmd_fit)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DeltaGridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
