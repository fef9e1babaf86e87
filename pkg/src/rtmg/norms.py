"""Mesh-dependent norms, exact solutions, discretization errors.

``norm_plt``:  ``sum_T ||v||_T^2 + sum_e |e| ||v . n_e||_e^2``
``norm_ph``:   ``sum_T ||grad q||_T^2 + sum_e |e|^{-1} ||[q]||_e^2``

Boundary edges contribute to both, with the one-sided trace as the jump.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .assembly import ProblemSpec, constant_vector
from .errors import ConfigurationError
from .mesh import canonical_domain
from .quadrature import edge_rule, triangle_rule
from .spaces import (DGSpace, RTSpace, barycentric, edge_points, legendre01,
                     to_physical)

CHUNK = 4096
CD_BETA = (2.0, -1.0)


def _chunks(n):
    for start in range(0, n, CHUNK):
        yield np.arange(start, min(n, start + CHUNK))


def _call(fn, points):
    flat = points.reshape(-1, 2)
    out = np.asarray(fn(flat), dtype=float)
    return out.reshape(points.shape[:-1] + out.shape[1:])


# --- evaluators: (tri_idx[N], points[N, n, 2]) -> values ----------------------

def _vector_evaluator(v, rt):
    if callable(v):
        return lambda tri, pts: _call(v, pts)
    coeffs = np.asarray(v, dtype=float)
    return lambda tri, pts: rt.eval(coeffs, tri, pts)


def _scalar_evaluators(q, dg):
    """Value and gradient evaluators for DG coefficients or a ``(fn, grad_fn)`` pair."""
    if isinstance(q, tuple):
        fn, grad_fn = q
        return (lambda tri, pts: _call(fn, pts)), (lambda tri, pts: _call(grad_fn, pts))
    coeffs = np.asarray(q, dtype=float)

    def grad(tri, pts):
        return np.broadcast_to(dg.grad(coeffs, tri)[:, None, :], pts.shape)

    return (lambda tri, pts: dg.eval(coeffs, tri, pts)), grad


def _plt_squared(mesh, val, degree):
    tr = triangle_rule(degree)
    er = edge_rule(degree)
    areas = mesh.areas
    elem = 0.0
    for tri in _chunks(mesh.n_triangles):
        vals = val(tri, to_physical(mesh, tri, tr.points))
        elem += np.einsum("t,q,tqd->", areas[tri], tr.weights, vals * vals)
    side = np.where(mesh.edge_triangles[:, 0] >= 0, mesh.edge_triangles[:, 0], mesh.edge_triangles[:, 1])
    normals = mesh.edge_normals
    lengths = mesh.edge_lengths
    edge = 0.0
    for e in _chunks(mesh.n_edges):
        vals = val(side[e], edge_points(mesh, e, er.points))
        vn = np.einsum("eqd,ed->eq", vals, normals[e])
        edge += np.einsum("e,q,eq->", lengths[e] ** 2, er.weights, vn * vn)
    return elem, edge


def _ph_squared(mesh, val, grad, degree):
    tr = triangle_rule(degree)
    er = edge_rule(degree)
    areas = mesh.areas
    elem = 0.0
    for tri in _chunks(mesh.n_triangles):
        g = grad(tri, to_physical(mesh, tri, tr.points))
        elem += np.einsum("t,q,tqd->", areas[tri], tr.weights, g * g)
    jump = 0.0
    for e in _chunks(mesh.n_edges):
        pts = edge_points(mesh, e, er.points)
        jn = np.zeros(pts.shape[:2])
        for side, sign in ((0, 1.0), (1, -1.0)):
            t = mesh.edge_triangles[e, side]
            has = t >= 0
            if has.any():
                jn[has] += sign * val(t[has], pts[has])
        # |e|^{-1} int_e ds = int_0^1 dt
        jump += np.einsum("q,eq->", er.weights, jn * jn)
    return elem, jump


def norm_plt(space: RTSpace, v, degree=8):
    """Broken L2 norm with ``|e|``-weighted normal traces; ``v`` is RT coefficients or a field."""
    elem, edge = _plt_squared(space.mesh, _vector_evaluator(v, space), degree)
    return float(np.sqrt(elem + edge))


def norm_ph(space: DGSpace, q, degree=8):
    """DG energy norm; ``q`` is DG coefficients or a ``(fn, grad_fn)`` pair."""
    val, grad = _scalar_evaluators(q, space)
    elem, jump = _ph_squared(space.mesh, val, grad, degree)
    return float(np.sqrt(elem + jump))


def l2_norm_rt(space: RTSpace, v, degree=8):
    return float(np.sqrt(_plt_squared(space.mesh, _vector_evaluator(v, space), degree)[0]))


@dataclass
class ExactSolution:
    p: Callable
    grad_p: Callable
    u: Callable
    f: Callable
    domain_tag: str
    kind: str
    beta: Optional[tuple] = None
    alpha: float = 1.0


@dataclass
class ErrorReport:
    e_u: float
    e_p: float
    h_grid: float
    level: int


def _square_exact(beta):
    pi = np.pi

    def p(x):
        return np.sin(pi * x[:, 0]) * np.sin(pi * x[:, 1])

    def grad_p(x):
        return pi * np.column_stack([np.cos(pi * x[:, 0]) * np.sin(pi * x[:, 1]),
                                     np.sin(pi * x[:, 0]) * np.cos(pi * x[:, 1])])

    def f(x):
        out = 2.0 * pi * pi * p(x)
        if beta is not None:
            out = out + grad_p(x) @ np.asarray(beta)
        return out

    return p, grad_p, f, 1.0


def _polar(x):
    r = np.hypot(x[:, 0], x[:, 1])
    theta = np.arctan2(x[:, 1], x[:, 0])
    theta = np.where(theta < 0, theta + 2.0 * np.pi, theta)
    return r, theta


def _lshape_exact(beta):
    a = 2.0 / 3.0

    def parts(x):
        X, Y = x[:, 0], x[:, 1]
        r, th = _polar(x)
        w = (1 - X * X) * (1 - Y * Y)
        gw = np.column_stack([-2 * X * (1 - Y * Y), -2 * Y * (1 - X * X)])
        lap_w = -2 * (1 - Y * Y) - 2 * (1 - X * X)
        s = r ** a * np.sin(a * th)
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = a * r ** (a - 1)
            gs = coef[:, None] * np.column_stack([np.sin((a - 1) * th), np.cos((a - 1) * th)])
        return w, gw, lap_w, s, gs

    def p(x):
        w, _, _, s, _ = parts(x)
        return w * s

    def grad_p(x):
        w, gw, _, s, gs = parts(x)
        return s[:, None] * gw + w[:, None] * gs

    def f(x):
        w, gw, lap_w, s, gs = parts(x)
        out = -(s * lap_w + 2.0 * np.einsum("nd,nd->n", gw, gs))
        if beta is not None:
            out = out + grad_p(x) @ np.asarray(beta)
        return out

    return p, grad_p, f, a


def make_exact(domain_tag, kind="darcy") -> ExactSolution:
    """Benchmark solutions: ``sin(pi x) sin(pi y)`` on the square and the
    corner-singular ``(1-x^2)(1-y^2) r^{2/3} sin(2 theta/3)`` on the L-shape,
    with ``u = -grad p`` and ``f`` from ``-lap p (+ beta . grad p)``."""
    domain = canonical_domain(domain_tag)
    if kind not in ("darcy", "cd"):
        raise ConfigurationError(f"unsupported problem kind {kind!r}; expected 'darcy' or 'cd'")
    beta = CD_BETA if kind == "cd" else None
    build = _square_exact if domain == "unit_square" else _lshape_exact
    p, grad_p, f, alpha = build(beta)

    def u(x):
        return -grad_p(x)

    return ExactSolution(p, grad_p, u, f, domain, kind, beta, alpha)


def make_problem(domain_tag, kind="darcy") -> ProblemSpec:
    ex = make_exact(domain_tag, kind)
    return ProblemSpec(
        f=ex.f,
        beta=constant_vector(ex.beta) if ex.beta is not None else None,
        exact_p=ex.p,
        exact_u=ex.u,
        kind="darcy" if kind == "darcy" else "general",
        expected_alpha=ex.alpha,
    )


def error_norms(rt: RTSpace, dg: DGSpace, uh, ph, exact: ExactSolution, degree=12) -> ErrorReport:
    mesh = rt.mesh
    uh = np.asarray(uh, dtype=float)
    ph = np.asarray(ph, dtype=float)

    def du(tri, pts):
        return _call(exact.u, pts) - rt.eval(uh, tri, pts)

    def dp(tri, pts):
        return _call(exact.p, pts) - dg.eval(ph, tri, pts)

    def dgrad(tri, pts):
        return _call(exact.grad_p, pts) - dg.grad(ph, tri)[:, None, :]

    e_u = np.sqrt(sum(_plt_squared(mesh, du, degree)))
    e_p = np.sqrt(sum(_ph_squared(mesh, dp, dgrad, degree)))
    return ErrorReport(float(e_u), float(e_p), mesh.h_grid, mesh.level)


def infsup_witness(q, rt: RTSpace, dg: DGSpace):
    """RT field with normal trace ``-[q].n_e / |e|`` and element means ``grad q``.

    It satisfies ``b(v_q, q) = ||q||_PH^2`` exactly.
    """
    mesh = rt.mesh
    q = np.asarray(q, dtype=float)
    er = edge_rule(4)
    ne = mesh.n_edges
    pts = edge_points(mesh, np.arange(ne), er.points)
    jn = np.zeros(pts.shape[:2])
    for side, sign in ((0, 1.0), (1, -1.0)):
        t = mesh.edge_triangles[:, side]
        has = t >= 0
        lam = barycentric(mesh, t[has], pts[has])
        jn[has] += sign * np.einsum("eqi,ei->eq", lam, q[dg.dofs[t[has]]])
    vn = -jn / mesh.edge_lengths[:, None]
    out = np.empty(rt.dim)
    out[: 2 * ne] = np.einsum("q,qi,eq->ei", er.weights, legendre01(er.points), vn).ravel()
    out[2 * ne:] = dg.grad(q, np.arange(mesh.n_triangles)).ravel()
    return out
