"""Command-line entry point.

Subcommands::

    solve       problem JSON -> run result
    analyze     problem JSON -> bound spectra, contraction factors, locus, best q
    locus       alpha-box JSON -> locus (and its image for a given q)
    lasso-demo  generate a Lasso instance and compare predicted and measured rates

Exit status is 0 on success, 2 for invalid input and 3 when the iteration
diverges.
"""

import argparse
import csv
import io
import json
import sys

from .bounds import AlphaBox, bound_spectrum, build_spectral_model, contraction_report
from .engine import AdmmConfig, run
from .exceptions import AdmmLocusError, NonFinite, ValidationError
from .lasso import gen_lasso, lasso_experiment
from .locus import locus_params, locus_to_dict, map_to_R, optimal_q, rho_max
from .problem import load_problem, validate_problem

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED = 0, 2, 3


def _flatten(d, prefix=""):
    rows = []
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            rows.extend(_flatten(v, key + "."))
        elif isinstance(v, list):
            rows.append((key, json.dumps(v, sort_keys=True)))
        else:
            rows.append((key, v))
    return rows


def _render(doc, fmt, table=None):
    if fmt == "json":
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if table is not None:
        header, rows = table
        w.writerow(header)
        w.writerows(rows)
    else:
        w.writerow(["key", "value"])
        w.writerows(_flatten(doc))
    return buf.getvalue()


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_checked(path):
    try:
        p = load_problem(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read problem: {exc}") from None
    issues = validate_problem(p)
    if issues:
        raise ValidationError("; ".join(issues))
    return p


def cmd_solve(args):
    p = _load_checked(args.problem)
    cfg = AdmmConfig(q=args.q, max_iters=args.max_iters, tol_state=args.tol_state,
                     tol_primal=args.tol_primal, record_history=True, seed=args.seed)
    res = run(p, cfg, z0="random" if args.random_start else None)
    doc = res.to_dict()
    table = (["iteration", "state_delta", "constraint_residual", "objective"],
             [[r.iteration, r.state_delta, r.constraint_residual, r.objective]
              for r in res.history])
    return doc, table


def cmd_analyze(args):
    p = _load_checked(args.problem)
    doc = contraction_report(p, args.q, seed=args.seed)
    bs = bound_spectrum(build_spectral_model(p))
    lp = locus_params(AlphaBox.from_bound_spectrum(bs))
    best = optimal_q(lp)
    doc["locus"] = locus_to_dict(lp)
    doc["rho_max"] = float(rho_max(lp, args.q))
    doc["q_opt"] = {"q": best.q, "rho": best.rho, "convergent": best.convergent}
    return doc, None


def cmd_locus(args):
    try:
        with open(args.box) as fh:
            box = AlphaBox.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read alpha box: {exc}") from None
    lp = locus_params(box)
    doc = locus_to_dict(lp)
    best = optimal_q(lp)
    doc["q_opt"] = {"q": best.q, "rho": best.rho, "convergent": best.convergent}
    if args.q is not None:
        doc["R"] = map_to_R(lp, args.q).to_dict()
        doc["rho_max"] = float(rho_max(lp, args.q))
    return doc, None


def cmd_lasso(args):
    rows, cols = (300, 200) if args.full_scale else (args.rows, args.cols)
    inst = gen_lasso(rows, cols, args.nnz, args.eps, args.seed)
    rep = lasso_experiment(inst, q=args.q, max_iters=args.max_iters)
    doc = rep.to_dict(include_history=True)
    doc["instance"] = {"rows": rows, "cols": cols, "nnz_per_row": args.nnz,
                       "eps": args.eps, "seed": args.seed}
    table = (["iteration", "state_delta", "constraint_residual", "objective"],
             [[r.iteration, r.state_delta, r.constraint_residual, r.objective]
              for r in rep.history])
    return doc, table


def build_parser():
    ap = argparse.ArgumentParser(prog="admmlocus", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", default=None, help="write output here instead of stdout")
    common.add_argument("--seed", type=int, default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="run the solver on a problem file")
    s.add_argument("problem")
    s.add_argument("--q", type=float, default=1.0)
    s.add_argument("--max-iters", type=int, default=1000)
    s.add_argument("--tol-state", type=float, default=1e-10)
    s.add_argument("--tol-primal", type=float, default=None)
    s.add_argument("--random-start", action="store_true")
    s.set_defaults(func=cmd_solve)

    a = sub.add_parser("analyze", parents=[common], help="bounds and contraction factors")
    a.add_argument("problem")
    a.add_argument("--q", type=float, default=1.0)
    a.set_defaults(func=cmd_analyze)

    lo = sub.add_parser("locus", parents=[common], help="eigenvalue locus of an alpha box")
    lo.add_argument("box")
    lo.add_argument("--q", type=float, default=None)
    lo.set_defaults(func=cmd_locus)

    d = sub.add_parser("lasso-demo", parents=[common], help="Lasso rate experiment")
    d.add_argument("--rows", type=int, default=90)
    d.add_argument("--cols", type=int, default=60)
    d.add_argument("--nnz", type=int, default=10)
    d.add_argument("--eps", type=float, default=1.0)
    d.add_argument("--q", type=float, default=1.0)
    d.add_argument("--max-iters", type=int, default=20000)
    d.add_argument("--full-scale", action="store_true", help="use 300 x 200")
    d.set_defaults(func=cmd_lasso)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        doc, table = args.func(args)
    except NonFinite as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except AdmmLocusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _emit(_render(doc, args.format, table), args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
