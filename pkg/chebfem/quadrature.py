import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np

from chebfem.common.exceptions import ContractViolation, IntegrationError


@dataclass(frozen=True)
class QuadRule1D:
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.nodes.shape[0]


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> QuadRule1D:
    """n-point Gauss-Legendre rule on [-1, 1], exact up to degree 2n-1."""
    if n < 1:
        raise ContractViolation('gauss_legendre', 'point count must be positive, got %d' % n)
    nodes, weights = np.polynomial.legendre.leggauss(n)
    # enforce exact symmetry about 0
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadRule1D(nodes, weights)


def default_points(M: int, N: int, p: int) -> int:
    return max(M, N) + p + 6


def sample_budget_points(M: int, N: int) -> int:
    """Points per direction so that the tensor rule has about 2MN samples."""
    return max(1, int(math.ceil(math.sqrt(2 * M * N))))


def tensor_grid(nu: int, nv: int) -> Tuple[QuadRule1D, QuadRule1D, np.ndarray]:
    """Both 1-D rules and the (nu, nv) array of product weights."""
    ru = gauss_legendre(nu)
    rv = gauss_legendre(nv)
    return ru, rv, np.outer(ru.weights, rv.weights)


def integrate2d(f: Callable, nu: int, nv: int) -> float:
    """
    Sum_ij w_i w_j f(u_i, v_j). f is called once with (nu, nv) arrays of
    sample coordinates and must return values of the same shape (or a scalar).
    """
    ru, rv, weights = tensor_grid(nu, nv)
    uu, vv = np.meshgrid(ru.nodes, rv.nodes, indexing='ij')
    values = np.broadcast_to(np.asarray(f(uu, vv), dtype=np.float64), uu.shape)
    bad = ~np.isfinite(values)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise IntegrationError((float(uu[i, j]), float(vv[i, j])))
    return float(np.sum(weights * values))


def integrate_tensor_products(fu: np.ndarray, fv: np.ndarray, c: np.ndarray) -> Tuple[np.ndarray, int]:
    """
    result[a, b] = Sum_ij fu[a, i] * fv[b, j] * c[i, j]

    c carries the quadrature weights and the coupling factor. Each entry is
    a full 2-D sample sum over the whole tensor grid; returns the result and
    the number of 2-D integrals performed.
    """
    if fu.shape[1] != c.shape[0] or fv.shape[1] != c.shape[1]:
        raise ContractViolation('integrate_tensor_products', 'sample grids do not match')
    result = np.einsum('ai,bj,ij->ab', fu, fv, c, optimize=False)
    return result, fu.shape[0] * fv.shape[0]
