"""
Dense symmetric-definite generalized eigenproblem S x = k0^2 M x.

M = L L^T is factored, C = L^-1 S L^-T is diagonalised with cyclic Jacobi
rotations in a fixed round-robin order (every round rotates n/2 disjoint
pairs at once), and eigenvalues below filter_tol * lambda_max are counted
as the discrete-gradient nullspace of the curl-curl operator.
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.linalg

from chebfem import logger
from chebfem.assembly import GlobalSystem
from chebfem.common.exceptions import (ContractViolation, ConvergenceError, MassNotPositiveDefinite,
                                       NumericalConsistencyError)

EIG_METHODS = ('auto', 'jacobi', 'lapack')
AUTO_JACOBI_LIMIT = 600
DEFAULT_FILTER_TOL = 1e-8
CLAMP_TOL = 1e-10


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    nullspace_count: int
    filter_tol: float
    vectors: Optional[np.ndarray] = None
    method: str = ''

    def lowest(self, count: int) -> np.ndarray:
        return self.eigenvalues[:count]


@lru_cache(maxsize=16)
def _round_robin(n: int) -> Tuple[Tuple[np.ndarray, np.ndarray], ...]:
    """Tournament schedule: n-1 (or n) rounds of disjoint index pairs covering all pairs once."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for k in range(m // 2):
            a, b = players[k], players[m - 1 - k]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.int64), np.array(q, dtype=np.int64)))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def jacobi_eigh(C: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix, ascending eigenvalues, orthonormal columns."""
    A = np.array(C, dtype=np.float64, copy=True)
    n = A.shape[0]
    V = np.eye(n)
    if n <= 1:
        return np.diag(A).copy(), V
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), V
    rounds = _round_robin(n)
    off = 0.0
    for sweep in range(max_sweeps):
        off = math.sqrt(max(float(np.sum(A * A) - np.sum(np.diag(A) ** 2)), 0.0))
        if off <= tol * scale:
            break
        for P, Q in rounds:
            app = A[P, P]
            aqq = A[Q, Q]
            apq = A[P, Q]
            active = apq != 0.0
            safe = np.where(active, apq, 1.0)
            tau = (aqq - app) / (2.0 * safe)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = np.where(active, 1.0 / np.sqrt(1.0 + t * t), 1.0)
            s = np.where(active, t * c, 0.0)
            Ap = A[:, P]
            Aq = A[:, Q]
            A[:, P] = c * Ap - s * Aq
            A[:, Q] = s * Ap + c * Aq
            Ap = A[P, :]
            Aq = A[Q, :]
            A[P, :] = c[:, None] * Ap - s[:, None] * Aq
            A[Q, :] = s[:, None] * Ap + c[:, None] * Aq
            A[P, Q] = 0.0
            A[Q, P] = 0.0
            Vp = V[:, P]
            Vq = V[:, Q]
            V[:, P] = c * Vp - s * Vq
            V[:, Q] = s * Vp + c * Vq
        logger.debug('Jacobi sweep %d: off-diagonal norm %.3e' % (sweep, off))
    else:
        raise ConvergenceError(max_sweeps, off)
    values = np.diag(A).copy()
    order = np.argsort(values, kind='stable')
    return values[order], V[:, order]


def _choose_method(method: str, n: int) -> str:
    if method not in EIG_METHODS:
        raise ContractViolation('spectrum', 'unknown eigen method %r' % method)
    if method == 'auto':
        return 'jacobi' if n <= AUTO_JACOBI_LIMIT else 'lapack'
    return method


def generalized_eigh(S: np.ndarray, M: np.ndarray, method: str = 'jacobi') -> Tuple[np.ndarray, np.ndarray]:
    """All eigenpairs of S x = lambda M x, vectors M-orthonormal."""
    n = S.shape[0]
    method = _choose_method(method, n)
    if method == 'lapack':
        try:
            return scipy.linalg.eigh(S, M)
        except np.linalg.LinAlgError as e:
            raise MassNotPositiveDefinite(n, str(e))
    try:
        L = scipy.linalg.cholesky(M, lower=True)
    except np.linalg.LinAlgError as e:
        raise MassNotPositiveDefinite(n, str(e))
    X = scipy.linalg.solve_triangular(L, S, lower=True)
    C = scipy.linalg.solve_triangular(L, X.T, lower=True)
    C = 0.5 * (C + C.T)
    values, Y = jacobi_eigh(C)
    vectors = scipy.linalg.solve_triangular(L, Y, lower=True, trans='T')
    return values, vectors


def filter_spectrum(values: np.ndarray, vectors: Optional[np.ndarray], filter_tol: float = DEFAULT_FILTER_TOL,
                    method: str = '') -> Spectrum:
    if values.shape[0] == 0:
        return Spectrum(values, 0, filter_tol, vectors, method)
    lmax = float(np.max(values))
    if lmax <= 0.0:
        raise NumericalConsistencyError('largest eigenvalue %g is not positive' % lmax)
    if np.any(values < -CLAMP_TOL * lmax):
        raise NumericalConsistencyError('negative eigenvalue %g beyond clamp tolerance' % float(np.min(values)))
    values = np.where(values < 0.0, 0.0, values)
    keep = values > filter_tol * lmax
    retained = values[keep]
    kept_vectors = vectors[:, keep] if vectors is not None else None
    return Spectrum(retained, int(np.count_nonzero(~keep)), filter_tol, kept_vectors, method)


def spectrum(system: Union[GlobalSystem, Tuple[np.ndarray, np.ndarray]], filter_tol: float = DEFAULT_FILTER_TOL,
             method: str = 'auto') -> Spectrum:
    if isinstance(system, GlobalSystem):
        S, M = system.S, system.M
    else:
        S, M = system
    chosen = _choose_method(method, S.shape[0])
    values, vectors = generalized_eigh(S, M, chosen)
    result = filter_spectrum(values, vectors, filter_tol, chosen)
    logger.debug('Spectrum (%s): %d retained, %d in nullspace' % (chosen, result.eigenvalues.shape[0], result.nullspace_count))
    return result


def residuals(S: np.ndarray, M: np.ndarray, spec: Spectrum) -> np.ndarray:
    """||S x - lambda M x|| / ||S x|| for every retained pair."""
    if spec.vectors is None:
        raise ContractViolation('residuals', 'spectrum carries no eigenvectors')
    SX = S @ spec.vectors
    R = SX - (M @ spec.vectors) * spec.eigenvalues[None, :]
    return np.linalg.norm(R, axis=0) / np.linalg.norm(SX, axis=0)


def analytic_cavity_eigenvalues(a: float, b: float, count: int) -> List[float]:
    """(m pi/a)^2 + (n pi/b)^2 of the homogeneous rectangular PEC cavity, (m, n) != (0, 0)."""
    values = []
    bound = count + 1
    for m in range(bound + 1):
        for n in range(bound + 1):
            if m == 0 and n == 0:
                continue
            values.append((m * math.pi / a) ** 2 + (n * math.pi / b) ** 2)
    return sorted(values)[:count]
