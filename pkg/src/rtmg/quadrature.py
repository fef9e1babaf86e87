"""Gauss rules on triangles and on the unit interval.

Triangle rules are collapsed (Duffy) tensor products of Gauss-Legendre rules,
so any degree is available with positive weights. Points are returned in
barycentric coordinates and weights are normalised to sum to one; multiply by
the element measure at the use site.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError

MAX_DEGREE = 20


@dataclass(frozen=True)
class TriangleRule:
    points: np.ndarray  # (n, 3) barycentric coordinates
    weights: np.ndarray  # (n,), sums to 1
    exact_degree: int

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True)
class EdgeRule:
    points: np.ndarray  # (n,) in [0, 1]
    weights: np.ndarray  # (n,), sums to 1
    exact_degree: int

    def __len__(self):
        return len(self.weights)


def _check_degree(exact_degree):
    if not isinstance(exact_degree, (int, np.integer)) or not 1 <= exact_degree <= MAX_DEGREE:
        raise ConfigurationError(
            f"quadrature degree must be an integer in [1, {MAX_DEGREE}], got {exact_degree!r}"
        )


def _gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def edge_rule(exact_degree: int) -> EdgeRule:
    _check_degree(exact_degree)
    n = (exact_degree + 2) // 2
    t, w = _gauss01(n)
    t.setflags(write=False)
    w.setflags(write=False)
    return EdgeRule(t, w, int(exact_degree))


@lru_cache(maxsize=None)
def triangle_rule(exact_degree: int) -> TriangleRule:
    _check_degree(exact_degree)
    # x = u, y = v (1 - u); the Jacobian (1 - u) raises the degree in u by one
    nu = (exact_degree + 3) // 2
    nv = (exact_degree + 2) // 2
    u, wu = _gauss01(nu)
    v, wv = _gauss01(nv)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = uu.ravel()
    y = (vv * (1.0 - uu)).ravel()
    w = (np.outer(wu * (1.0 - u), wv)).ravel() * 2.0  # reference area is 1/2
    bary = np.column_stack([1.0 - x - y, x, y])
    bary.setflags(write=False)
    w.setflags(write=False)
    return TriangleRule(bary, w, int(exact_degree))
