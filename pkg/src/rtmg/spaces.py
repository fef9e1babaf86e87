"""Order-1 Raviart-Thomas-Nedelec and discontinuous P1 spaces.

RT1 degrees of freedom, all taken with the global edge normal ``n_e`` and the
global edge parameter ``t`` (0 at the lower-index vertex):

* edge ``e``, dofs ``2e, 2e+1``: ``int_0^1 (v . n_e) L_i(t) dt`` with the
  orthonormal Legendre pair ``L_0 = 1``, ``L_1 = sqrt(3) (2t - 1)``;
* triangle ``T``, dofs ``2E + 2T, 2E + 2T + 1``: the mean of ``v`` over ``T``.

Because the functionals are defined globally, element bases need no sign
fix-ups. Each element basis is the dual basis of these functionals within
``P1^2 + x P1~`` written in monomials of the scaled local coordinate
``(x - centroid) / diam``.

DG-P1 dofs are vertex values per triangle, dof ``3T + i`` at local vertex ``i``.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError
from .mesh import TriangleMesh
from .quadrature import edge_rule, triangle_rule

SQRT3 = np.sqrt(3.0)


def legendre01(t):
    """Orthonormal Legendre pair on [0, 1], shape ``t.shape + (2,)``."""
    t = np.asarray(t, dtype=float)
    return np.stack([np.ones_like(t), SQRT3 * (2.0 * t - 1.0)], axis=-1)


def _monomials(xi):
    """RT1 monomial fields at local coordinates ``xi[..., 2]`` -> ``[..., 8, 2]``."""
    a = xi[..., 0]
    b = xi[..., 1]
    one = np.ones_like(a)
    zero = np.zeros_like(a)
    vx = np.stack([one, a, b, zero, zero, zero, a * a, a * b], axis=-1)
    vy = np.stack([zero, zero, zero, one, a, b, a * b, b * b], axis=-1)
    return np.stack([vx, vy], axis=-1)


def _monomial_div(xi):
    """Divergence (w.r.t. xi) of the monomial fields -> ``[..., 8]``."""
    a = xi[..., 0]
    b = xi[..., 1]
    one = np.ones_like(a)
    zero = np.zeros_like(a)
    return np.stack([zero, one, zero, zero, zero, one, 3.0 * a, 3.0 * b], axis=-1)


def to_physical(mesh, tri_idx, bary):
    """Barycentric points ``bary[n, 3]`` (or ``[N, n, 3]``) -> physical ``[N, n, 2]``."""
    p = mesh.vertices[mesh.triangles[tri_idx]]  # (N, 3, 2)
    if bary.ndim == 2:
        return np.einsum("qi,tid->tqd", bary, p)
    return np.einsum("tqi,tid->tqd", bary, p)


def barycentric(mesh, tri_idx, points):
    """Barycentric coordinates of ``points[N, n, 2]`` w.r.t. triangles ``tri_idx[N]``."""
    p = mesh.vertices[mesh.triangles[tri_idx]]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)  # columns
    rel = points - p[:, None, 0, :]
    lam12 = np.linalg.solve(jac[:, None], rel[..., None])[..., 0]
    return np.concatenate([1.0 - lam12.sum(axis=-1, keepdims=True), lam12], axis=-1)


def edge_points(mesh, edge_idx, t):
    """Physical points at parameters ``t[n]`` on edges -> ``[N, n, 2]``."""
    ab = mesh.vertices[mesh.edges[edge_idx]]
    return ab[:, None, 0, :] + t[None, :, None] * (ab[:, None, 1, :] - ab[:, None, 0, :])


@dataclass(eq=False)
class DGSpace:
    mesh: TriangleMesh

    def __post_init__(self):
        self.dofs = np.arange(3 * self.mesh.n_triangles).reshape(-1, 3)
        p = self.mesh.vertices[self.mesh.triangles]
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
        jinv_t = np.linalg.inv(jac).transpose(0, 2, 1)
        ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        self.grads = np.einsum("tde,ie->tid", jinv_t, ref)  # (T, 3, 2)

    @property
    def dim(self):
        return 3 * self.mesh.n_triangles

    def eval(self, coeffs, tri_idx, points):
        tri_idx = np.asarray(tri_idx)
        lam = barycentric(self.mesh, tri_idx, points)
        return np.einsum("tqi,ti->tq", lam, np.asarray(coeffs)[self.dofs[tri_idx]])

    def grad(self, coeffs, tri_idx):
        c = np.asarray(coeffs)[self.dofs[tri_idx]]
        return np.einsum("tid,ti->td", self.grads[tri_idx], c)


@dataclass(eq=False)
class RTSpace:
    mesh: TriangleMesh
    centers: np.ndarray = field(init=False)
    scales: np.ndarray = field(init=False)
    coef: np.ndarray = field(init=False)
    local_dofs: np.ndarray = field(init=False)

    def __post_init__(self):
        mesh = self.mesh
        ne, nt = mesh.n_edges, mesh.n_triangles
        self.centers = mesh.vertices[mesh.triangles].mean(axis=1)
        self.scales = mesh.diameters
        eot = mesh.edge_of_triangle
        self.local_dofs = np.concatenate(
            [np.stack([2 * eot, 2 * eot + 1], axis=-1).reshape(nt, 6),
             2 * ne + 2 * np.arange(nt)[:, None] + np.arange(2)[None, :]],
            axis=1,
        )
        tri = np.arange(nt)
        vander = local_dof_functionals(self, tri, self._mono_at, degree_edge=4, degree_tri=4)
        self.coef = np.linalg.inv(vander)  # (T, 8 mono, 8 basis)

    @property
    def dim(self):
        return 2 * self.mesh.n_edges + 2 * self.mesh.n_triangles

    def _xi(self, tri_idx, points):
        return (points - self.centers[tri_idx, None, :]) / self.scales[tri_idx, None, None]

    def _mono_at(self, tri_idx, points):
        return _monomials(self._xi(tri_idx, points))

    def basis_at(self, tri_idx, points):
        """Element basis of ``tri_idx[N]`` at ``points[N, n, 2]`` -> ``[N, n, 8, 2]``."""
        tri_idx = np.asarray(tri_idx)
        mono = _monomials(self._xi(tri_idx, points))
        return np.einsum("tqmd,tmj->tqjd", mono, self.coef[tri_idx])

    def div_basis_at(self, tri_idx, points):
        tri_idx = np.asarray(tri_idx)
        mdiv = _monomial_div(self._xi(tri_idx, points)) / self.scales[tri_idx, None, None]
        return np.einsum("tqm,tmj->tqj", mdiv, self.coef[tri_idx])

    def eval(self, coeffs, tri_idx, points):
        tri_idx = np.asarray(tri_idx)
        c = np.asarray(coeffs)[self.local_dofs[tri_idx]]
        return np.einsum("tqjd,tj->tqd", self.basis_at(tri_idx, points), c)

    def div_eval(self, coeffs, tri_idx, points):
        tri_idx = np.asarray(tri_idx)
        c = np.asarray(coeffs)[self.local_dofs[tri_idx]]
        return np.einsum("tqj,tj->tq", self.div_basis_at(tri_idx, points), c)


def local_dof_functionals(space, tri_idx, fields_at, degree_edge=8, degree_tri=8):
    """Apply the 8 local RT1 functionals of triangles ``tri_idx`` to fields.

    ``fields_at(tri_idx, points[N, n, 2])`` returns ``[N, n, m, 2]`` values of
    ``m`` vector fields; the result is ``[N, 8, m]``.
    """
    mesh = space.mesh
    tri_idx = np.asarray(tri_idx)
    er = edge_rule(degree_edge)
    tr = triangle_rule(degree_tri)
    leg = legendre01(er.points)  # (nq, 2)
    normals = mesh.edge_normals
    rows = []
    for j in range(3):
        e = mesh.edge_of_triangle[tri_idx, j]
        vals = fields_at(tri_idx, edge_points(mesh, e, er.points))  # (N, nq, m, 2)
        vn = np.einsum("tqmd,td->tqm", vals, normals[e])
        rows.append(np.einsum("q,qi,tqm->tim", er.weights, leg, vn))
    vals = fields_at(tri_idx, to_physical(mesh, tri_idx, tr.points))
    rows.append(np.einsum("q,tqmd->tdm", tr.weights, vals))
    return np.concatenate(rows, axis=1)


def rt_eval(space: RTSpace, coeffs, triangle, point):
    """Value of the RT function at one point of one triangle."""
    pt = np.asarray(point, dtype=float).reshape(1, 1, 2)
    _check_triangle(space.mesh, triangle)
    return space.eval(coeffs, np.array([triangle]), pt)[0, 0]


def rt_div_eval(space: RTSpace, coeffs, triangle, point):
    pt = np.asarray(point, dtype=float).reshape(1, 1, 2)
    _check_triangle(space.mesh, triangle)
    return float(space.div_eval(coeffs, np.array([triangle]), pt)[0, 0])


def _check_triangle(mesh, triangle):
    if not 0 <= int(triangle) < mesh.n_triangles:
        raise IndexError(f"triangle index {triangle} out of range")


def _field_values(fn, points):
    flat = points.reshape(-1, 2)
    return np.asarray(fn(flat), dtype=float).reshape(points.shape[:-1] + (-1,))


def rt_interpolate(space: RTSpace, field, degree=8):
    """Canonical interpolant: reproduce the edge and interior moments of ``field``.

    ``field`` maps points ``[N, 2]`` to values ``[N, 2]``.
    """
    mesh = space.mesh
    ne, nt = mesh.n_edges, mesh.n_triangles
    er = edge_rule(degree)
    tr = triangle_rule(degree)
    coeffs = np.empty(space.dim)
    vals = _field_values(field, edge_points(mesh, np.arange(ne), er.points))
    vn = np.einsum("eqd,ed->eq", vals, mesh.edge_normals)
    coeffs[: 2 * ne] = np.einsum("q,qi,eq->ei", er.weights, legendre01(er.points), vn).ravel()
    vals = _field_values(field, to_physical(mesh, np.arange(nt), tr.points))
    coeffs[2 * ne:] = np.einsum("q,tqd->td", tr.weights, vals).ravel()
    return coeffs


def dg_interpolate(space: DGSpace, fn):
    """Per-element vertex interpolation of a scalar function ``fn(points[N, 2])``."""
    pts = space.mesh.vertices[space.mesh.triangles].reshape(-1, 2)
    return np.asarray(fn(pts), dtype=float).reshape(-1)


def _check_consecutive(coarse_mesh, fine_mesh):
    if fine_mesh.level != coarse_mesh.level + 1 or fine_mesh.n_triangles != 4 * coarse_mesh.n_triangles:
        raise ConfigurationError("injection needs spaces on consecutive hierarchy levels")


def injection_matrix_rt(coarse: RTSpace, fine: RTSpace):
    """Sparse map from coarse RT coefficients to the fine coefficients of the same field."""
    cm, fm = coarse.mesh, fine.mesh
    _check_consecutive(cm, fm)
    ft = np.arange(fm.n_triangles)
    parent = ft // 4

    def coarse_basis(tri_idx, points):
        return coarse.basis_at(parent[tri_idx], points)

    local = local_dof_functionals(fine, ft, coarse_basis, degree_edge=4, degree_tri=4)  # (T, 8, 8)
    rows = np.broadcast_to(fine.local_dofs[:, :, None], local.shape)
    cols = np.broadcast_to(coarse.local_dofs[parent][:, None, :], local.shape)
    # a fine edge dof is written once, by the first triangle holding that edge
    owner = np.full(fm.n_edges, fm.n_triangles, dtype=np.int64)
    np.minimum.at(owner, fm.edge_of_triangle.ravel(), np.repeat(ft, 3))
    keep_row = np.ones((fm.n_triangles, 8), dtype=bool)
    keep_row[:, :6] = np.repeat(owner[fm.edge_of_triangle] == ft[:, None], 2, axis=1)
    keep = np.broadcast_to(keep_row[:, :, None], local.shape) & (np.abs(local) > 1e-14)
    mat = sp.coo_matrix((local[keep], (rows[keep], cols[keep])), shape=(fine.dim, coarse.dim))
    return mat.tocsr()


def injection_matrix_dg(coarse: DGSpace, fine: DGSpace):
    cm, fm = coarse.mesh, fine.mesh
    _check_consecutive(cm, fm)
    ft = np.arange(fm.n_triangles)
    parent = ft // 4
    lam = barycentric(cm, parent, fm.vertices[fm.triangles])  # (T, 3 fine vertices, 3)
    lam[np.abs(lam) < 1e-14] = 0.0
    rows = np.broadcast_to(fine.dofs[:, :, None], lam.shape)
    cols = np.broadcast_to(coarse.dofs[parent][:, None, :], lam.shape)
    keep = lam != 0.0
    mat = sp.coo_matrix((lam[keep], (rows[keep], cols[keep])), shape=(fine.dim, coarse.dim))
    return mat.tocsr()


@dataclass
class BlockVector:
    """A pair ``(v, q)`` in ``V_k x Q_k`` stored as one flat array."""

    v_part: np.ndarray
    q_part: np.ndarray
    level: int = 0

    @classmethod
    def from_flat(cls, x, n_v, level=0):
        x = np.asarray(x)
        return cls(x[:n_v].copy(), x[n_v:].copy(), level)

    @classmethod
    def zeros(cls, n_v, n_q, level=0):
        return cls(np.zeros(n_v), np.zeros(n_q), level)

    def flat(self):
        return np.concatenate([self.v_part, self.q_part])

    def __add__(self, other):
        return BlockVector(self.v_part + other.v_part, self.q_part + other.q_part, self.level)

    def __sub__(self, other):
        return BlockVector(self.v_part - other.v_part, self.q_part - other.q_part, self.level)

    def __mul__(self, a):
        return BlockVector(a * self.v_part, a * self.q_part, self.level)

    __rmul__ = __mul__
