"""Command line entry point: ``rtmg convergence ...`` and ``rtmg contraction ...``."""
import argparse
import csv
import os
import sys

from . import harness, reference
from . import multigrid as mg
from .errors import ConfigurationError
from .mesh import build_hierarchy
from .norms import make_problem


def parse_levels(text):
    """``"2..6"`` or ``"2,3,5"`` or ``"4"``."""
    try:
        if ".." in text:
            a, b = text.split("..")
            a, b = int(a), int(b)
            if b < a:
                raise ValueError
            return list(range(a, b + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level range {text!r}; use A..B or a comma list") from None


def parse_ints(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="rtmg", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, default_levels):
        sp.add_argument("--domain", choices=["square", "lshape"], default="square")
        sp.add_argument("--problem", choices=["darcy", "cd"], default="darcy")
        sp.add_argument("--cycle", choices=["w", "v"], default="w")
        sp.add_argument("--levels", type=parse_levels, default=None,
                        help=f"level range A..B (default {default_levels})")
        sp.add_argument("--m", type=parse_ints, default=list(harness.DEFAULT_M_VALUES),
                        help="comma separated smoothing step counts")
        sp.add_argument("--tol", type=float, default=1e-10)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--format", choices=["csv", "md"], default="md")
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        sp.add_argument("--check", action="store_true",
                        help="compare with the reference tables; exit 1 on mismatch")
        sp.add_argument("--dump-mesh", metavar="DIR", default=None)
        sp.add_argument("--dump-matrices", metavar="DIR", default=None)
        sp.add_argument("--history", metavar="PATH", default=None,
                        help="write per-cycle residual or contraction histories as CSV")
        sp.add_argument("--velocity-weight", type=float, default=1.0,
                        help="constant c in the c h^2 velocity weight of the multigrid inner product")
        sp.add_argument("--quiet", action="store_true")

    conv = sub.add_parser("convergence", help="discretization error table")
    common(conv, "2..6, or 2..7 with --deep")
    conv.add_argument("--deep", action="store_true", help="include level 7 (h = 1/128)")
    conv.add_argument("--solver", choices=["direct", "mg"], default="direct")

    cont = sub.add_parser("contraction", help="multigrid contraction number table")
    common(cont, "1..5, or 1..6 with --deep")
    cont.add_argument("--deep", action="store_true", help="include level 6")
    cont.add_argument("--plot-data", metavar="PATH", default=None,
                      help="write (m, contraction) pairs per level for log-log plots")
    return p


def _spec(args, kind):
    deep_top = (7 if kind == "convergence" else 6) if args.deep else (6 if kind == "convergence" else 5)
    levels = args.levels or list(range(2 if kind == "convergence" else 1, deep_top + 1))
    cfg = mg.MGConfig(velocity_weight=args.velocity_weight)
    return harness.ExperimentSpec(
        kind=kind, domain_tag=args.domain, problem=args.problem, cycle=args.cycle,
        levels=levels, m_values=args.m, tol=args.tol, seed=args.seed,
        output_format=args.format, solver=getattr(args, "solver", "direct"), mg_config=cfg,
    )


def _dump(spec, args):
    hier = build_hierarchy(spec.domain_tag, max(spec.levels))
    if args.dump_mesh:
        os.makedirs(args.dump_mesh, exist_ok=True)
        for k in spec.levels:
            hier[k].dump(os.path.join(args.dump_mesh, f"mesh_level{k}.txt"))
    if args.dump_matrices:
        from .assembly import saddle_matrix
        from .spaces import DGSpace, RTSpace
        os.makedirs(args.dump_matrices, exist_ok=True)
        problem = make_problem(spec.domain_tag, spec.problem)
        for k in spec.levels:
            mesh = hier[k]
            saddle_matrix(problem, RTSpace(mesh), DGSpace(mesh)).dump(
                os.path.join(args.dump_matrices, f"K_level{k}.txt"))


def check_convergence(spec, rows):
    """Reference comparison for a convergence table; returns failure messages."""
    failures = []
    rtol = reference.CONVERGENCE_VALUE_RTOL[spec.domain_tag]
    for r in rows:
        ref = reference.convergence_reference(spec.domain_tag, spec.problem, r.h)
        if ref is None:
            continue
        for name, got, want in (("e_u", r.e_u, ref[0]), ("e_p", r.e_p, ref[1])):
            if abs(got - want) > rtol * want:
                failures.append(f"h={r.h:g} {name}={got:.4e}, reference {want:.4e}")
    return failures


def check_contraction(spec, rows):
    failures = []
    for r in rows:
        for k, v in zip(r.levels, r.values):
            want = reference.contraction_reference(spec.domain_tag, spec.problem, spec.cycle, r.m, k)
            if v is None:
                failures.append(f"m={r.m} k={k}: no estimate")
            elif want is not None and abs(v - want) > reference.CONTRACTION_ATOL:
                failures.append(f"m={r.m} k={k}: {v:.3f}, reference {want:.2f}")
    return failures


def _write_history(path, rows_iter):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["experiment", "cycle", "value"])
        for label, hist in rows_iter:
            for i, val in enumerate(hist, 1):
                w.writerow([label, i, f"{val:.6e}"])


def main(argv=None):
    args = build_parser().parse_args(argv)
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr, flush=True))
    try:
        spec = _spec(args, args.command)
        if args.dump_mesh or args.dump_matrices:
            _dump(spec, args)
        if args.command == "convergence":
            rows = harness.run_convergence(spec, log=log)
            failures = check_convergence(spec, rows) if args.check else []
            if args.history and spec.solver == "mg":
                _write_history(args.history, [(f"level{r.level}", r.history) for r in rows])
        else:
            problem = make_problem(spec.domain_tag, spec.problem)
            state = mg.setup(build_hierarchy(spec.domain_tag, max(spec.levels)), problem, spec.config())
            rows = harness.run_contraction(spec, log=log, state=state)
            failures = check_contraction(spec, rows) if args.check else []
            if args.history:
                _write_history(args.history, [(f"m{r.m}_k{k}", ratios) for r in rows
                                              for k, ratios in zip(r.levels, r.history)])
            if args.plot_data:
                harness.emit(rows, "plot", args.plot_data)
        harness.emit(rows, args.format, args.out)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for msg in failures:
        print(f"CHECK FAILED: {msg}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
