"""All-at-once W/V-cycle multigrid for the RT1 x DG-P1 saddle systems.

Vectors are flat coefficient arrays ``x = (v, q)`` (or 2-D arrays holding one
vector per column). Right-hand sides ``g`` of ``A_k x = g`` are kept in the
primal representation ``g = M_k^{-1} (dual load)``, where ``M_k`` is the
diagonal of the mesh-dependent inner product ``[x, y]_k = h_k^2 (v, w)_k +
((q, r))_k`` built from lumped masses.

With ``Ksys`` the system matrix (``K`` or ``K^T`` for the adjoint problem)
the operators are::

    A   = M^{-1} Ksys           system operator
    A^t = M^{-1} Ksys^T         its [., .]-transpose
    S (v, q) = (h^2 v, L q)     block preconditioner, L ~ D^{-1} M_q

    pre-smoothing:   x <- x + delta S A^t (g - A x)
    post-smoothing:  x <- x + delta A^t S (g - A x)

For the symmetric (Darcy) kind ``A^t = A`` and these are the ``S B`` / ``B S``
smoothers. The coarse-grid correction restricts with ``M_{k-1}^{-1} P^T M_k``,
the [., .]-adjoint of the natural injection ``P``.
"""
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (LumpedMass, ProblemSpec, SaddleMatrix, assemble_a,
                       assemble_dg_stiffness, load_vector, lumped_masses,
                       saddle_matrix)
from .errors import ConfigurationError, ConvergenceError, SetupError
from .mesh import MeshHierarchy
from .spaces import (DGSpace, RTSpace, injection_matrix_dg,
                     injection_matrix_rt)

MG_KINDS = ("symmetric", "general", "general_adjoint")


@dataclass
class InnerConfig:
    """Settings of the DG V-cycle that realizes ``L_k``."""

    pre: int = 4
    post: int = 4
    jacobi_weight: float = 2.0 / 3.0
    coarse_level: int = 0
    galerkin: bool = True


@dataclass
class PowerIterConfig:
    max_iters: int = 2000
    tol: float = 1e-6
    seed: int = 0


@dataclass
class MGConfig:
    cycle: str = "W"
    m1: int = 10
    m2: int = 10
    theta: float = 1.0
    inner_lk: InnerConfig = field(default_factory=InnerConfig)
    coarse_level: int = 0
    power_iter: PowerIterConfig = field(default_factory=PowerIterConfig)
    mesh_size: str = "grid"  # h_k in [., .]_k: "grid" spacing or max "diameter"
    velocity_weight: float = 1.0  # c in c h_k^2 (v, w)_k
    dense_max_dim: int = 1500

    def __post_init__(self):
        self.cycle = str(self.cycle).upper()
        if self.cycle not in ("W", "V"):
            raise ConfigurationError(f"cycle must be 'W' or 'V', got {self.cycle!r}")
        if self.m1 < 0 or self.m2 < 0 or self.m1 + self.m2 < 1:
            raise ConfigurationError("need m1, m2 >= 0 and m1 + m2 >= 1")
        if not 0 < self.theta <= 1:
            raise ConfigurationError("theta must lie in (0, 1]")
        if not self.velocity_weight > 0:
            raise ConfigurationError("velocity_weight must be positive")
        if self.mesh_size not in ("grid", "diameter"):
            raise ConfigurationError("mesh_size must be 'grid' or 'diameter'")

    @property
    def p(self):
        return 2 if self.cycle == "W" else 1


@dataclass(eq=False)
class LevelData:
    level: int
    rt: RTSpace
    dg: DGSpace
    K: SaddleMatrix
    Ksys: sp.csr_matrix
    KsysT: sp.csr_matrix
    lumped: LumpedMass
    M: np.ndarray
    D_mat: sp.csr_matrix
    Mrt: sp.csr_matrix  # consistent RT mass, for L2 norms
    h: float
    h2: float  # velocity weight of [., .]_k, c h_k^2
    P: Optional[sp.csr_matrix] = None  # injection from level - 1
    delta: float = 0.0
    rho: float = 0.0
    rho_parts: tuple = ()

    @property
    def n_v(self):
        return self.rt.dim

    @property
    def n_q(self):
        return self.dg.dim

    @property
    def dim(self):
        return self.rt.dim + self.dg.dim

    @property
    def Minv(self):
        return 1.0 / self.M


@dataclass(eq=False)
class _DGLevel:
    G: sp.csr_matrix
    dinv: np.ndarray
    P: Optional[sp.csr_matrix]  # DG injection from the level below
    Z: Optional[np.ndarray] = None  # dense V-cycle matrix, small levels only
    lu: object = None


@dataclass(eq=False)
class MGState:
    levels: List[LevelData]
    kind: str
    config: MGConfig
    problem: Optional[ProblemSpec] = None
    dg_chains: Dict[int, List[_DGLevel]] = field(default_factory=dict)
    _coarse: object = None
    _dense: Dict[tuple, tuple] = field(default_factory=dict)

    @property
    def max_level(self):
        return len(self.levels) - 1

    def with_config(self, **changes):
        """Same level data and damping, different cycle settings."""
        cfg = replace(self.config, **changes)
        return MGState(self.levels, self.kind, cfg, self.problem, self.dg_chains, self._coarse, {})


def _col(d, x):
    return d[:, None] * x if x.ndim == 2 else d * x


# --- setup -------------------------------------------------------------------

def _mg_kind(problem, kind):
    if kind is None:
        kind = "symmetric" if problem.kind == "darcy" else "general"
    if kind not in MG_KINDS:
        raise ConfigurationError(f"multigrid kind must be one of {MG_KINDS}, got {kind!r}")
    if kind == "symmetric" and problem.kind != "darcy":
        raise ConfigurationError("the symmetric multigrid kind needs a darcy problem")
    return kind


def build_levels(hierarchy: MeshHierarchy, problem: ProblemSpec, kind, mesh_size="grid",
                 velocity_weight=1.0):
    levels = []
    for k, mesh in enumerate(hierarchy.levels):
        rt, dg = RTSpace(mesh), DGSpace(mesh)
        K = saddle_matrix(problem, rt, dg)
        Ksys = K.K.T.tocsr() if kind == "general_adjoint" else K.K
        lumped = lumped_masses(rt, dg)
        h = mesh.h_grid if mesh_size == "grid" else float(mesh.diameters.max())
        lev = LevelData(
            level=k, rt=rt, dg=dg, K=K, Ksys=Ksys, KsysT=Ksys.T.tocsr(), lumped=lumped,
            M=lumped.block_diagonal(np.sqrt(velocity_weight) * h),
            D_mat=assemble_dg_stiffness(dg).D_mat, Mrt=assemble_a(rt), h=h, h2=velocity_weight * h * h,
        )
        if k > 0:
            prev = levels[-1]
            lev.P = sp.block_diag(
                [injection_matrix_rt(prev.rt, rt), injection_matrix_dg(prev.dg, dg)], format="csr")
        levels.append(lev)
    return levels


def _build_dg_chain(levels, k, inner: InnerConfig):
    """DG operators for the V-cycle defining ``L_k``, index j = 0..k."""
    chain = [None] * (k + 1)
    G = levels[k].D_mat
    for j in range(k, inner.coarse_level - 1, -1):
        if j < k:
            Pj = levels[j + 1].P[levels[j + 1].n_v:, levels[j].n_v:]
            G = (Pj.T @ G @ Pj).tocsr() if inner.galerkin else levels[j].D_mat
        Pdg = levels[j].P[levels[j].n_v:, levels[j - 1].n_v:].tocsr() if j > inner.coarse_level else None
        chain[j] = _DGLevel(G=G, dinv=1.0 / G.diagonal(), P=Pdg)
    coarse = chain[inner.coarse_level]
    coarse.lu = _factor(coarse.G)
    return chain


def _factor(A):
    if A.shape[0] <= 2000:
        lu = sla.lu_factor(A.toarray())
        return lambda b: sla.lu_solve(lu, b)
    lu = spla.splu(A.tocsc())
    return lu.solve


def setup(hierarchy: MeshHierarchy, problem: ProblemSpec, config: Optional[MGConfig] = None,
          kind=None) -> MGState:
    """Assemble every level, build the ``L_k`` hierarchies and choose ``delta_k``."""
    config = config or MGConfig()
    kind = _mg_kind(problem, kind)
    if not 0 <= config.coarse_level <= hierarchy.max_level:
        raise ConfigurationError("coarse_level outside the hierarchy")
    levels = build_levels(hierarchy, problem, kind, config.mesh_size, config.velocity_weight)
    state = MGState(levels, kind, config, problem)
    c = config.coarse_level
    state._coarse = _factor(levels[c].Ksys)
    for k in range(c + 1, len(levels)):
        state.dg_chains[k] = _build_dg_chain(levels, k, config.inner_lk)
        _densify_dg(state, k)
    for k in range(c + 1, len(levels)):
        estimate_damping(state, k)
    return state


def estimate_damping(state: MGState, level: int):
    """Set ``delta_k = theta / rho`` from power iteration on the smoothing operators.

    ``rho`` is the larger of the spectral radii of ``A^t S A`` (post) and
    ``A S A^t`` (similar to the pre-smoothing operator ``S A^t A``); both are
    self-adjoint and positive in ``[., .]_k`` and coincide for the symmetric kind.
    """
    lev = state.levels[level]
    ops = [lambda x: apply_AtSA(state, level, x)]
    if state.kind != "symmetric":
        ops.append(lambda x: apply_ASAt(state, level, x))
    rhos = tuple(power_iteration(op, lev.M, lev.dim, state.config.power_iter) for op in ops)
    lev.rho_parts = rhos
    lev.rho = max(rhos)
    lev.delta = state.config.theta / lev.rho
    return lev.delta


def power_iteration(op, M, n, cfg: PowerIterConfig):
    """Largest eigenvalue of an operator that is SPD w.r.t. ``diag(M)``."""
    rng = np.random.default_rng(cfg.seed)
    x = rng.standard_normal(n)
    x /= np.sqrt(x @ (M * x))
    lam = 0.0
    history = []
    for it in range(cfg.max_iters):
        y = op(x)
        new = float(x @ (M * y))
        history.append(new)
        if it > 0 and abs(new - lam) <= cfg.tol * abs(new):
            return new
        lam = new
        x = y / np.sqrt(y @ (M * y))
    raise SetupError(
        f"power iteration did not settle in {cfg.max_iters} iterations",
        diagnostics={"last_estimates": history[-20:]},
    )


# --- inner DG multigrid --------------------------------------------------------

def _dg_vcycle(chain, j, b, inner: InnerConfig):
    lev = chain[j]
    if lev.Z is not None:
        return lev.Z @ b
    if lev.lu is not None:
        return lev.lu(b)
    w = inner.jacobi_weight
    y = np.zeros_like(b)
    for i in range(inner.pre):
        y = y + w * _col(lev.dinv, b - lev.G @ y if i else b)
    r = b - lev.G @ y
    y = y + lev.P @ _dg_vcycle(chain, j - 1, lev.P.T @ r, inner)
    for _ in range(inner.post):
        y = y + w * _col(lev.dinv, b - lev.G @ y)
    return y


def _densify_dg(state, k):
    chain = state.dg_chains[k]
    inner = state.config.inner_lk
    for j in range(inner.coarse_level + 1, k + 1):
        n = chain[j].G.shape[0]
        if n > state.config.dense_max_dim:
            break
        chain[j].Z = _dg_vcycle(chain, j, np.eye(n), inner)


def apply_Lk(state: MGState, level: int, b):
    """One symmetric V(pre, post) cycle for ``D_mat y = b`` (``b`` a dual vector)."""
    b = np.asarray(b, dtype=float)
    if level == state.config.inner_lk.coarse_level or level not in state.dg_chains:
        return spla.spsolve(state.levels[level].D_mat.tocsc(), b) if b.any() else np.zeros_like(b)
    return _dg_vcycle(state.dg_chains[level], level, b, state.config.inner_lk)


def apply_Sk(state: MGState, level: int, x):
    """``S_k (v, q) = (c h_k^2 v, L_k q)`` with ``L_k q = V-cycle(M_q q)``."""
    lev = state.levels[level]
    x = np.asarray(x, dtype=float)
    nv = lev.n_v
    v, q = x[:nv], x[nv:]
    return np.concatenate([lev.h2 * v, apply_Lk(state, level, _col(lev.lumped.Mq, q))])


def apply_A(state, level, x):
    lev = state.levels[level]
    return _col(lev.Minv, lev.Ksys @ x)


def apply_At(state, level, x):
    lev = state.levels[level]
    return _col(lev.Minv, lev.KsysT @ x)


def apply_AtSA(state, level, x):
    return apply_At(state, level, apply_Sk(state, level, apply_A(state, level, x)))


def apply_ASAt(state, level, x):
    return apply_A(state, level, apply_Sk(state, level, apply_At(state, level, x)))


# --- smoothing and cycles ------------------------------------------------------

def smooth(state: MGState, level: int, x, g, phase="pre"):
    """One damped Richardson step; ``g`` is the primal right-hand side."""
    lev = state.levels[level]
    r = g - apply_A(state, level, x)
    if phase == "pre":
        corr = apply_Sk(state, level, apply_At(state, level, r))
    elif phase == "post":
        corr = apply_At(state, level, apply_Sk(state, level, r))
    else:
        raise ConfigurationError(f"phase must be 'pre' or 'post', got {phase!r}")
    return x + lev.delta * corr


def restrict(state, level, r):
    """``I_k^{k-1}`` on a primal vector: ``M_{k-1}^{-1} P^T M_k r``."""
    lev, low = state.levels[level], state.levels[level - 1]
    return _col(low.Minv, lev.P.T @ _col(lev.M, r))


def prolong(state, level, y):
    return state.levels[level].P @ y


def coarse_solve(state, g):
    lev = state.levels[state.config.coarse_level]
    return state._coarse(_col(lev.M, g))


def _cycle_generic(state, level, g, x0):
    cfg = state.config
    if level == cfg.coarse_level:
        return coarse_solve(state, g)
    x = np.array(x0, dtype=float, copy=True)
    for _ in range(cfg.m1):
        x = smooth(state, level, x, g, "pre")
    gc = restrict(state, level, g - apply_A(state, level, x))
    y = np.zeros_like(gc)
    for _ in range(cfg.p):
        y = mg_cycle(state, level - 1, gc, y)
    x = x + prolong(state, level, y)
    for _ in range(cfg.m2):
        x = smooth(state, level, x, g, "post")
    return x


def _dense_operators(state, level):
    """Dense error propagation ``E`` and ``N = (I - E) A^{-1}`` of one cycle.

    ``E_k = R^{m2} (I - P (I - E_{k-1}^p) A_{k-1}^{-1} I_k^{k-1} A_k) S^{m1}``
    """
    key = (level, state.config.cycle, state.config.m1, state.config.m2)
    if key in state._dense:
        return state._dense[key]
    cfg = state.config
    lev = state.levels[level]
    n = lev.dim
    Ad = (lev.Minv[:, None] * lev.Ksys.toarray())
    Ainv = sla.solve(lev.Ksys.toarray(), np.diag(lev.M))
    if level == cfg.coarse_level:
        E = np.zeros((n, n))
    else:
        I = np.eye(n)
        S = apply_Sk(state, level, I)
        At = lev.Minv[:, None] * lev.KsysT.toarray()
        pre = np.linalg.matrix_power(I - lev.delta * (S @ At @ Ad), cfg.m1)
        post = np.linalg.matrix_power(I - lev.delta * (At @ S @ Ad), cfg.m2)
        Ec, Nc = _dense_operators(state, level - 1)
        Np = Nc if cfg.p == 1 else Ec @ Nc + Nc
        P = lev.P.toarray()
        low = state.levels[level - 1]
        R = low.Minv[:, None] * (P.T * lev.M[None, :])
        E = post @ (I - P @ Np @ R @ Ad) @ pre
    N = (np.eye(n) - E) @ Ainv
    state._dense[key] = (E, N)
    return E, N


def mg_cycle(state: MGState, level: int, g, x0=None):
    """One W- or V-cycle for ``A_k x = g`` starting from ``x0``."""
    g = np.asarray(g, dtype=float)
    x0 = np.zeros_like(g) if x0 is None else np.asarray(x0, dtype=float)
    if level < state.config.coarse_level:
        raise ConfigurationError("level below the coarse level")
    if state.levels[level].dim <= state.config.dense_max_dim:
        E, N = _dense_operators(state, level)
        return E @ x0 + N @ g
    return _cycle_generic(state, level, g, x0)


def mg_cycle_reference(state, level, g, x0=None):
    """The cycle without dense shortcuts on any level (for cross-checking)."""
    ref = MGState(state.levels, state.kind, replace(state.config, dense_max_dim=-1),
                  state.problem, state.dg_chains, state._coarse, {})
    g = np.asarray(g, dtype=float)
    x0 = np.zeros_like(g) if x0 is None else x0
    return _cycle_generic(ref, level, g, x0)


# --- drivers -------------------------------------------------------------------

def residual_norm(state, level, load, x):
    lev = state.levels[level]
    r = load - lev.Ksys @ x
    return float(np.sqrt(r @ (lev.Minv * r)))


def solve(state: MGState, level: int, load, tol=1e-10, max_cycles=1000):
    """Iterate cycles from zero until the ``M^{-1}``-weighted relative residual is below ``tol``.

    ``load`` is the dual right-hand side (e.g. from :func:`load_vector`).
    Returns ``(x, history)`` with one relative residual per cycle.
    """
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    lev = state.levels[level]
    load = np.asarray(load, dtype=float)
    x = np.zeros(lev.dim)
    r0 = residual_norm(state, level, load, x)
    if r0 == 0.0:
        return x, []
    g = lev.Minv * load
    history = []
    for _ in range(max_cycles):
        x = mg_cycle(state, level, g, x)
        history.append(residual_norm(state, level, load, x) / r0)
        if history[-1] <= tol:
            return x, history
    raise ConvergenceError(f"no convergence to {tol} in {max_cycles} cycles", history)


def combined_norm(state, level, x):
    """``||v||_L2 + ||q||_PH`` from the consistent RT mass and the DG stiffness."""
    lev = state.levels[level]
    v, q = x[:lev.n_v], x[lev.n_v:]
    return float(np.sqrt(v @ (lev.Mrt @ v)) + np.sqrt(q @ (lev.D_mat @ q)))


def contraction_number(state: MGState, level: int, max_iters=400, window=10, tol=1e-4,
                       return_history=False):
    """Spectral radius of the cycle's error propagation by power iteration.

    Iterates ``e <- cycle(0, e)``, normalising in :func:`combined_norm`; the
    estimate is the geometric mean of the last ``window`` norm ratios.
    """
    lev = state.levels[level]
    rng = np.random.default_rng(state.config.power_iter.seed)
    e = rng.standard_normal(lev.dim)
    e /= combined_norm(state, level, e)
    zero = np.zeros(lev.dim)
    ratios = []
    estimates = []
    for _ in range(max_iters):
        e = mg_cycle(state, level, zero, e)
        nrm = combined_norm(state, level, e)
        ratios.append(nrm)
        if nrm == 0.0:
            return (0.0, ratios) if return_history else 0.0
        e /= nrm
        if len(ratios) >= window:
            est = float(np.exp(np.mean(np.log(ratios[-window:]))))
            if estimates and len(ratios) >= 2 * window and abs(est - estimates[-1]) < tol:
                return (est, ratios) if return_history else est
            estimates.append(est)
    raise ConvergenceError("contraction estimate did not settle", ratios[-20:])


def discrete_load(state, level, f=None):
    lev = state.levels[level]
    f = f if f is not None else state.problem.f
    return load_vector(lev.rt, lev.dg, f)
