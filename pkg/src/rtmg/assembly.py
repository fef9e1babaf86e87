"""Bilinear forms, load vectors and lumped inner products.

Sign conventions::

    a(w, v)   = int A^{-1} w . v
    b(v, q)   = -int (div v) q
    c_h(r, q) = int (gamma r + beta . grad_h r) q
    F(q)      = -int f q

and the saddle matrix ``K = [[A, B^T], [B, -C]]`` with ``C[i, j] = c_h(psi_j, psi_i)``.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, ConfigurationError
from .quadrature import edge_rule, triangle_rule
from .spaces import DGSpace, RTSpace, edge_points, to_physical, barycentric

PROBLEM_KINDS = ("darcy", "general")


def identity_tensor(points):
    return np.broadcast_to(np.eye(2), (len(points), 2, 2))


def constant_vector(value):
    value = np.asarray(value, dtype=float)

    def fn(points):
        return np.broadcast_to(value, (len(points), 2))

    return fn


def constant_scalar(value):
    def fn(points):
        return np.full(len(points), float(value))

    return fn


@dataclass
class ProblemSpec:
    """Coefficients and data of ``-div(A grad p) + beta.grad p + gamma p = f``.

    All callables take points ``[N, 2]``. ``A_inv`` returns ``[N, 2, 2]``,
    ``beta`` ``[N, 2]``, ``gamma`` and ``f`` ``[N]``. ``beta``/``gamma`` of
    ``None`` mean zero.
    """

    f: Callable
    A_inv: Callable = identity_tensor
    beta: Optional[Callable] = None
    gamma: Optional[Callable] = None
    exact_p: Optional[Callable] = None
    exact_u: Optional[Callable] = None
    kind: str = "darcy"
    expected_alpha: float = 1.0
    A_inv_eig_range: tuple = (1.0, 1.0)

    def __post_init__(self):
        if self.kind not in PROBLEM_KINDS:
            raise ConfigurationError(f"problem kind must be one of {PROBLEM_KINDS}, got {self.kind!r}")
        if self.kind == "darcy" and (self.beta is not None or self.gamma is not None):
            raise ConfigurationError("a darcy problem has no advection or reaction terms")
        if not 0.5 < self.expected_alpha <= 1.0:
            raise ConfigurationError("expected_alpha must lie in (1/2, 1]")
        lo, hi = self.A_inv_eig_range
        if not 0 < lo <= hi:
            raise ConfigurationError("A_inv eigenvalue range must be positive")

    @property
    def symmetric(self):
        return self.kind == "darcy"


@dataclass
class SaddleMatrix:
    A_block: sp.csr_matrix
    B_block: sp.csr_matrix
    C_block: sp.csr_matrix

    def __post_init__(self):
        nv = self.A_block.shape[0]
        nq = self.C_block.shape[0]
        if self.A_block.shape != (nv, nv) or self.B_block.shape != (nq, nv) or self.C_block.shape != (nq, nq):
            raise ConfigurationError("saddle blocks have inconsistent shapes")
        self.K = sp.bmat([[self.A_block, self.B_block.T], [self.B_block, -self.C_block]], format="csr")

    @property
    def n_v(self):
        return self.A_block.shape[0]

    @property
    def n_q(self):
        return self.C_block.shape[0]

    def apply(self, v, q):
        return self.A_block @ v + self.B_block.T @ q, self.B_block @ v - self.C_block @ q

    def dump(self, path):
        """Coordinate text format, one ``i j value`` line per stored entry."""
        coo = self.K.tocoo()
        with open(path, "w") as fh:
            for i, j, x in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {x:.17g}\n")


@dataclass
class LumpedMass:
    Mv: np.ndarray
    Mq: np.ndarray
    h_grid: float

    def block_diagonal(self, h=None):
        """Diagonal of ``[., .]_k``: ``h^2 Mv`` on velocities, ``Mq`` on pressures."""
        h = self.h_grid if h is None else h
        return np.concatenate([h * h * self.Mv, self.Mq])


@dataclass
class DGStiffness:
    D_mat: sp.csr_matrix


def _scatter(local, rows, cols, shape):
    r = np.broadcast_to(rows[:, :, None], local.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], local.shape).ravel()
    return sp.coo_matrix((local.ravel(), (r, c)), shape=shape).tocsr()


def _element_quadrature(mesh, degree):
    rule = triangle_rule(degree)
    tri = np.arange(mesh.n_triangles)
    pts = to_physical(mesh, tri, rule.points)
    wts = rule.weights[None, :] * mesh.areas[:, None]  # (T, nq)
    return rule, tri, pts, wts


def assemble_a(space: RTSpace, A_inv=identity_tensor, degree=8):
    mesh = space.mesh
    rule, tri, pts, wts = _element_quadrature(mesh, degree)
    phi = space.basis_at(tri, pts)
    kinv = np.asarray(A_inv(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:2] + (2, 2))
    local = np.einsum("tq,tqde,tqje,tqid->tij", wts, kinv, phi, phi)
    return _scatter(local, space.local_dofs, space.local_dofs, (space.dim, space.dim))


def assemble_b(rt: RTSpace, dg: DGSpace, degree=8):
    mesh = rt.mesh
    rule, tri, pts, wts = _element_quadrature(mesh, degree)
    div = rt.div_basis_at(tri, pts)  # (T, nq, 8)
    local = -np.einsum("tq,qi,tqj->tij", wts, rule.points, div)
    return _scatter(local, dg.dofs, rt.local_dofs, (dg.dim, rt.dim))


def assemble_c(dg: DGSpace, beta=None, gamma=None, degree=8):
    mesh = dg.mesh
    rule, tri, pts, wts = _element_quadrature(mesh, degree)
    flat = pts.reshape(-1, 2)
    lam = rule.points
    local = np.zeros((mesh.n_triangles, 3, 3))
    if gamma is not None:
        g = np.asarray(gamma(flat), dtype=float).reshape(pts.shape[:2])
        local += np.einsum("tq,tq,qi,qj->tij", wts, g, lam, lam)
    if beta is not None:
        b = np.asarray(beta(flat), dtype=float).reshape(pts.shape)
        bgrad = np.einsum("tqd,tjd->tqj", b, dg.grads)  # beta . grad psi_j
        local += np.einsum("tq,tqj,qi->tij", wts, bgrad, lam)
    return _scatter(local, dg.dofs, dg.dofs, (dg.dim, dg.dim))


def assemble_dg_mass(dg: DGSpace, degree=4):
    return assemble_c(dg, gamma=constant_scalar(1.0), degree=degree)


def assemble_rhs(dg: DGSpace, f, degree=12):
    """Load ``F(psi_i) = -int f psi_i`` on the pressure block."""
    mesh = dg.mesh
    rule, tri, pts, wts = _element_quadrature(mesh, degree)
    fv = np.asarray(f(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:2])
    local = -np.einsum("tq,tq,qi->ti", wts, fv, rule.points)
    out = np.zeros(dg.dim)
    np.add.at(out, dg.dofs.ravel(), local.ravel())
    return out


def load_vector(rt: RTSpace, dg: DGSpace, f, degree=12):
    """Full dual load on ``V_k x Q_k`` (zero velocity block)."""
    return np.concatenate([np.zeros(rt.dim), assemble_rhs(dg, f, degree)])


def lumped_masses(rt: RTSpace, dg: DGSpace):
    """Diagonals of the consistent RT (with ``A_inv = I``) and DG mass matrices."""
    Mv = assemble_a(rt).diagonal()
    Mq = assemble_dg_mass(dg).diagonal()
    if np.any(Mv <= 0) or np.any(Mq <= 0):
        raise AssemblyError("nonpositive lumped mass entry")
    return LumpedMass(Mv, Mq, rt.mesh.h_grid)


def dg_edge_traces(dg: DGSpace, degree=4):
    """Jump traces of DG basis functions along every edge.

    Returns ``(dofs[E, 6], jn[E, nq, 6], rule)`` where ``jn`` holds
    ``[psi] . n_e`` at the edge quadrature points for the 3 basis functions
    of the triangle on the ``+n_e`` side (columns 0-2) and of the other side
    (columns 3-5). Missing sides on the boundary have zero columns.
    """
    mesh = dg.mesh
    rule = edge_rule(degree)
    ne = mesh.n_edges
    pts = edge_points(mesh, np.arange(ne), rule.points)
    dofs = np.zeros((ne, 6), dtype=np.int64)
    jn = np.zeros((ne, len(rule), 6))
    for side, sign in ((0, 1.0), (1, -1.0)):
        t = mesh.edge_triangles[:, side]
        has = t >= 0
        lam = barycentric(mesh, t[has], pts[has])
        dofs[has, 3 * side:3 * side + 3] = dg.dofs[t[has]]
        jn[has, :, 3 * side:3 * side + 3] = sign * lam
    return dofs, jn, rule


def assemble_dg_stiffness(dg: DGSpace) -> DGStiffness:
    """``sum_T int grad q . grad r + sum_e |e|^{-1} int_e [q] . [r]`` incl. boundary edges."""
    mesh = dg.mesh
    grad_local = np.einsum("t,tid,tjd->tij", mesh.areas, dg.grads, dg.grads)
    D = _scatter(grad_local, dg.dofs, dg.dofs, (dg.dim, dg.dim))
    dofs, jn, rule = dg_edge_traces(dg, degree=4)
    # 1/|e| * int_e ds = int_0^1 dt
    jump_local = np.einsum("q,eqi,eqj->eij", rule.weights, jn, jn)
    D = D + _scatter(jump_local, dofs, dofs, (dg.dim, dg.dim))
    D.eliminate_zeros()
    return DGStiffness(D.tocsr())


def saddle_matrix(problem: ProblemSpec, rt: RTSpace, dg: DGSpace) -> SaddleMatrix:
    if rt.mesh is not dg.mesh:
        raise ConfigurationError("RT and DG spaces must live on the same mesh")
    A = assemble_a(rt, problem.A_inv)
    B = assemble_b(rt, dg)
    if problem.kind == "darcy":
        C = sp.csr_matrix((dg.dim, dg.dim))
    else:
        C = assemble_c(dg, problem.beta, problem.gamma)
    return SaddleMatrix(A, B, C)
