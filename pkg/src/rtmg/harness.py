"""Experiment drivers for convergence-rate and contraction-number tables."""
import csv
import io
import math
import sys
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse.linalg as spla

from . import multigrid as mg
from .assembly import load_vector, saddle_matrix
from .errors import ConfigurationError, ConvergenceError, SetupError
from .mesh import build_hierarchy, canonical_domain
from .norms import error_norms, make_exact, make_problem
from .spaces import DGSpace, RTSpace

DEFAULT_M_VALUES = (10, 20, 40, 80)


@dataclass
class ExperimentSpec:
    kind: str = "convergence"
    domain_tag: str = "unit_square"
    problem: str = "darcy"
    cycle: str = "W"
    levels: Sequence[int] = (2, 3, 4, 5, 6)
    m_values: Sequence[int] = DEFAULT_M_VALUES
    tol: float = 1e-10
    output_format: str = "csv"
    seed: int = 0
    solver: str = "direct"  # convergence runs only: "direct" or "mg"
    mg_config: Optional[mg.MGConfig] = None

    def __post_init__(self):
        if self.kind not in ("convergence", "contraction"):
            raise ConfigurationError(f"unknown experiment kind {self.kind!r}")
        self.domain_tag = canonical_domain(self.domain_tag)
        if self.problem not in ("darcy", "cd"):
            raise ConfigurationError(f"unknown problem {self.problem!r}")
        self.cycle = str(self.cycle).upper()
        if self.cycle not in ("W", "V"):
            raise ConfigurationError(f"unknown cycle {self.cycle!r}")
        self.levels = tuple(int(k) for k in self.levels)
        if not self.levels or min(self.levels) < 1 or max(self.levels) > 7:
            raise ConfigurationError("levels must lie in [1, 7]")
        self.m_values = tuple(int(m) for m in self.m_values)
        if any(m < 1 for m in self.m_values):
            raise ConfigurationError("m values must be positive")
        if self.output_format not in ("csv", "markdown", "md"):
            raise ConfigurationError(f"unknown output format {self.output_format!r}")
        if self.solver not in ("direct", "mg"):
            raise ConfigurationError(f"unknown solver {self.solver!r}")

    @property
    def expected_alpha(self):
        return make_exact(self.domain_tag, self.problem).alpha

    def config(self, m=None):
        base = self.mg_config or mg.MGConfig()
        m1, m2 = (base.m1, base.m2) if m is None else (m, m)
        return replace(base, cycle=self.cycle, m1=m1, m2=m2,
                       power_iter=replace(base.power_iter, seed=self.seed))


@dataclass
class TableRow:
    """A convergence row ``(h, e_u, rate_u, e_p, rate_p)`` or a contraction row ``(m, values)``."""

    h: Optional[float] = None
    e_u: Optional[float] = None
    rate_u: Optional[float] = None
    e_p: Optional[float] = None
    rate_p: Optional[float] = None
    m: Optional[int] = None
    values: List[Optional[float]] = field(default_factory=list)
    levels: List[int] = field(default_factory=list)
    level: Optional[int] = None
    cycles: Optional[int] = None
    history: list = field(default_factory=list)  # residuals, or ratio lists per level

    @property
    def is_convergence(self):
        return self.m is None


def rate(prev, cur):
    return math.log2(prev / cur)


def solve_level(problem, mesh, solver="direct", state=None, level=None, tol=1e-10):
    """Discrete solution ``(rt, dg, uh, ph, residual_history)`` on one mesh."""
    rt, dg = RTSpace(mesh), DGSpace(mesh)
    load = load_vector(rt, dg, problem.f)
    if solver == "direct":
        K = saddle_matrix(problem, rt, dg).K
        x = spla.spsolve(K.tocsc(), load)
        hist = []
    else:
        x, hist = mg.solve(state, level, load, tol=tol)
    return rt, dg, x[:rt.dim], x[rt.dim:], hist


def run_convergence(spec: ExperimentSpec, log=None) -> List[TableRow]:
    if spec.kind != "convergence":
        raise ConfigurationError("run_convergence needs a convergence spec")
    problem = make_problem(spec.domain_tag, spec.problem)
    exact = make_exact(spec.domain_tag, spec.problem)
    hier = build_hierarchy(spec.domain_tag, max(spec.levels))
    state = None
    if spec.solver == "mg":
        state = mg.setup(hier, problem, spec.config())
    rows = []
    for k in spec.levels:
        try:
            rt, dg, uh, ph, hist = solve_level(problem, hier[k], spec.solver, state, k, spec.tol)
        except ConvergenceError as exc:
            raise ConvergenceError(f"level {k}: {exc}", exc.history) from exc
        rep = error_norms(rt, dg, uh, ph, exact)
        row = TableRow(h=rep.h_grid, e_u=rep.e_u, e_p=rep.e_p, level=k,
                       cycles=len(hist), history=hist)
        if rows and rows[-1].level == k - 1:
            row.rate_u = rate(rows[-1].e_u, row.e_u)
            row.rate_p = rate(rows[-1].e_p, row.e_p)
        rows.append(row)
        if log:
            log(f"level {k}: h={rep.h_grid:g} e_u={rep.e_u:.4e} e_p={rep.e_p:.4e}")
    return rows


def run_contraction(spec: ExperimentSpec, log=None, state=None) -> List[TableRow]:
    """Contraction numbers for every ``(m, k)``; failed cells are recorded as ``None``."""
    if spec.kind != "contraction":
        raise ConfigurationError("run_contraction needs a contraction spec")
    if state is None:
        problem = make_problem(spec.domain_tag, spec.problem)
        hier = build_hierarchy(spec.domain_tag, max(spec.levels))
        state = mg.setup(hier, problem, spec.config())
    rows = []
    for m in spec.m_values:
        s = state.with_config(cycle=spec.cycle, m1=m, m2=m)
        values, histories = [], []
        for k in spec.levels:
            try:
                rho, ratios = mg.contraction_number(s, k, return_history=True)
            except (ConvergenceError, SetupError) as exc:
                if log:
                    log(f"m={m} k={k}: failed ({exc})")
                rho, ratios = None, list(getattr(exc, "history", []))
            values.append(rho)
            histories.append(ratios)
            if log and rho is not None:
                log(f"m={m} k={k}: {rho:.3f}")
        rows.append(TableRow(m=m, values=values, levels=list(spec.levels), history=histories))
    return rows


# --- output ----------------------------------------------------------------------

def _sci(x):
    return "" if x is None else f"{x:.3e}"


def _fixed(x, digits=3):
    return "" if x is None else f"{x:.{digits}f}"


def format_csv(rows: Sequence[TableRow]):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if rows[0].is_convergence:
        w.writerow(["h", "e_u", "rate_u", "e_p", "rate_p"])
        for r in rows:
            w.writerow([_sci(r.h), _sci(r.e_u), _sci(r.rate_u), _sci(r.e_p), _sci(r.rate_p)])
    else:
        w.writerow(["m"] + [f"k={k}" for k in rows[0].levels])
        for r in rows:
            w.writerow([r.m] + [_sci(v) for v in r.values])
    return buf.getvalue()


def format_markdown(rows: Sequence[TableRow]):
    lines = []
    if rows[0].is_convergence:
        lines.append("| h | e_u | rate | e_p | rate |")
        lines.append("|---|---|---|---|---|")
        for r in rows:
            h = f"1/{round(1 / r.h)}" if r.h < 1 else f"{r.h:g}"
            lines.append(f"| {h} | {_sci(r.e_u)} | {_fixed(r.rate_u) or '-'} | "
                         f"{_sci(r.e_p)} | {_fixed(r.rate_p) or '-'} |")
    else:
        ks = rows[0].levels
        lines.append("| m | " + " | ".join(f"k={k}" for k in ks) + " |")
        lines.append("|---" * (len(ks) + 1) + "|")
        for r in rows:
            lines.append(f"| {r.m} | " + " | ".join(_fixed(v, 2) or "fail" for v in r.values) + " |")
    return "\n".join(lines) + "\n"


def plot_data(rows: Sequence[TableRow]):
    """Per level, the ``(m, contraction)`` pairs for a log-log plot."""
    if rows[0].is_convergence:
        raise ConfigurationError("plot data is defined for contraction tables")
    out = {}
    for i, k in enumerate(rows[0].levels):
        out[k] = [(r.m, r.values[i]) for r in rows if r.values[i] is not None]
    return out


def format_plot_data(rows):
    blocks = []
    for k, pts in plot_data(rows).items():
        blocks.append(f"# k={k}\n" + "".join(f"{m} {v:.6e}\n" for m, v in pts))
    return "\n".join(blocks)


def loglog_slope(points):
    m, v = np.log(np.array(points, dtype=float)).T
    return float(np.polyfit(m, v, 1)[0])


def emit(rows: Sequence[TableRow], fmt="csv", destination=None):
    """Write rows as ``csv``, ``markdown``/``md`` or ``plot`` data to a path or stream."""
    if not rows:
        raise ConfigurationError("nothing to emit")
    text = {"csv": format_csv, "markdown": format_markdown, "md": format_markdown,
            "plot": format_plot_data}.get(fmt)
    if text is None:
        raise ConfigurationError(f"unknown format {fmt!r}")
    text = text(rows)
    if destination is None:
        sys.stdout.write(text)
    elif hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w") as fh:
            fh.write(text)
    return text
