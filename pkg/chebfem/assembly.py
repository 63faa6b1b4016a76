"""
Element stiffness and mass matrices of the hierarchical Chebyshev basis

    E_u = U_m(u) T_n(v),  m < M, n <= N
    E_v = T_m(u) U_n(v),  m <= M, n < N

filled either by direct tensor quadrature of every distinct 2-D integral
or by the product-to-sum method: a handful of kernel tables integrated
once per element, then every entry as a signed sum of at most four
kernel entries.
"""
import asyncio
import concurrent.futures
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse
import tqdm

from chebfem import logger
from chebfem.chebyshev import PolyFamily, chebyshev_table, product_to_sum
from chebfem.common.exceptions import AssemblyError, ContractViolation, GeometryError, IntegrationError
from chebfem.connectivity import DofMap, build_connectivity
from chebfem.mesh import CurvedQuadElement, Materials, Mesh, sample_element
from chebfem.quadrature import gauss_legendre, integrate_tensor_products, tensor_grid

BACKENDS = ('direct', 'p2s')
BLOCK_NAMES = ('S_uu', 'S_uv', 'S_vu', 'S_vv', 'M_uu', 'M_uv', 'M_vu', 'M_vv')

# computed blocks: (test component, basis component, kind, kernel)
COMPUTED_BLOCKS = {
    'S_uu': ('u', 'u', 'curl', 'Ks'),
    'S_uv': ('u', 'v', 'curl', 'Ks'),
    'S_vv': ('v', 'v', 'curl', 'Ks'),
    'M_uu': ('u', 'u', 'mass', 'Kuu'),
    'M_uv': ('u', 'v', 'mass', 'Kuv'),
    'M_vv': ('v', 'v', 'mass', 'Kvv'),
}
TRANSPOSED_BLOCKS = {'S_vu': 'S_uv', 'M_vu': 'M_uv'}

# kernel -> (u family, v family, sign of the coupling factor in the block)
KERNELS = {
    'Ks': (PolyFamily.TNS, PolyFamily.TNS, 1.0),
    'Kuu': (PolyFamily.TNS, PolyFamily.T, 1.0),
    'Kuv': (PolyFamily.U, PolyFamily.U, -1.0),
    'Kvv': (PolyFamily.T, PolyFamily.TNS, 1.0),
}


@dataclass(frozen=True)
class Orders:
    M: int
    N: int

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise ContractViolation('Orders', 'M and N must be positive, got M=%d N=%d' % (self.M, self.N))

    @property
    def D(self) -> int:
        return self.M * self.N

    @property
    def nu(self) -> int:
        return self.M * (self.N + 1)

    @property
    def nv(self) -> int:
        return (self.M + 1) * self.N

    def ranges(self, component: str) -> Tuple[int, int]:
        """Index counts (u direction, v direction) of a field component."""
        if component == 'u':
            return self.M, self.N + 1
        return self.M + 1, self.N


Factor = Optional[Tuple[float, PolyFamily, int]]


def basis_factor(component: str, kind: str, direction: str, index: int) -> Factor:
    """
    1-D factor of a basis function (kind 'mass') or of its reference curl
    (kind 'curl') along one direction. curl E_u = -n U_m(u) U_(n-1)(v),
    curl E_v = m U_(m-1)(u) U_n(v). None when the factor vanishes.
    """
    if component == 'u':
        if direction == 'u':
            return (1.0, PolyFamily.U, index)
        if kind == 'mass':
            return (1.0, PolyFamily.T, index)
        return None if index == 0 else (-float(index), PolyFamily.U, index - 1)
    if direction == 'v':
        return (1.0, PolyFamily.U, index)
    if kind == 'mass':
        return (1.0, PolyFamily.T, index)
    return None if index == 0 else (float(index), PolyFamily.U, index - 1)


class PairTable:
    """
    Distinct 1-D factor products of one block along one direction. When the
    block is symmetric, (i1, i2) and (i2, i1) share one pair.
    """

    def __init__(self, test: str, basis: str, kind: str, direction: str, orders: Orders, family: PolyFamily):
        d = 0 if direction == 'u' else 1
        n1 = orders.ranges(test)[d]
        n2 = orders.ranges(basis)[d]
        symmetric = test == basis
        self.index = np.empty((n1, n2), dtype=np.int64)
        self.factors: List[Tuple[Factor, Factor]] = []
        for i1 in range(n1):
            for i2 in range(n2):
                if symmetric and i2 < i1:
                    self.index[i1, i2] = self.index[i2, i1]
                    continue
                self.index[i1, i2] = len(self.factors)
                self.factors.append((basis_factor(test, kind, direction, i1), basis_factor(basis, kind, direction, i2)))
        npairs = len(self.factors)
        # product-to-sum expansions, padded to two terms
        self.coeff = np.zeros((npairs, 2))
        self.degree = np.zeros((npairs, 2), dtype=np.int64)
        for p, (f1, f2) in enumerate(self.factors):
            if f1 is None or f2 is None:
                continue
            expansion = product_to_sum(f1[1], f1[2], f2[1], f2[2]).scaled(f1[0] * f2[0])
            for t, term in enumerate(expansion):
                if term.family is not family:
                    raise ContractViolation('PairTable', 'expansion family %s does not match kernel family %s' % (term.family, family))
                self.coeff[p, t] = term.coeff
                self.degree[p, t] = term.degree

    def __len__(self):
        return len(self.factors)

    def values(self, samples: Dict[PolyFamily, np.ndarray]) -> np.ndarray:
        """Products of the two factors at the quadrature nodes, shape (npairs, nq)."""
        nq = samples[PolyFamily.T].shape[1]
        out = np.zeros((len(self.factors), nq))
        for p, (f1, f2) in enumerate(self.factors):
            if f1 is None or f2 is None:
                continue
            out[p] = (f1[0] * f2[0]) * samples[f1[1]][f1[2]] * samples[f2[1]][f2[2]]
        return out


class BlockLayout:
    def __init__(self, name: str, orders: Orders):
        test, basis, kind, kernel = COMPUTED_BLOCKS[name]
        fam_u, fam_v, sign = KERNELS[kernel]
        self.name = name
        self.kernel = kernel
        self.sign = sign
        self.pu = PairTable(test, basis, kind, 'u', orders, fam_u)
        self.pv = PairTable(test, basis, kind, 'v', orders, fam_v)
        tu, tv = orders.ranges(test)
        bu, bv = orders.ranges(basis)
        # local flat index = u index * (v count) + v index
        i1 = np.repeat(np.arange(tu), tv)
        j1 = np.tile(np.arange(tv), tu)
        i2 = np.repeat(np.arange(bu), bv)
        j2 = np.tile(np.arange(bv), bu)
        self.PU = self.pu.index[i1[:, None], i2[None, :]]
        self.PV = self.pv.index[j1[:, None], j2[None, :]]
        self.shape = self.PU.shape
        self.combination = self._combination(orders)

    def _combination(self, orders: Orders) -> scipy.sparse.csr_matrix:
        """
        Sparse map from the raveled kernel table to the raveled block. Row r
        holds the signed weights coeff_u * coeff_v of entry r, at most four.
        """
        rows, cols = kernel_shapes(orders)[self.kernel]
        du, dv = self.pu.degree[self.PU], self.pv.degree[self.PV]
        if du.max(initial=0) >= rows or dv.max(initial=0) >= cols:
            raise ContractViolation('BlockLayout', 'kernel table %s too small for M=%d N=%d' % (self.kernel, orders.M, orders.N))
        cu, cv = self.pu.coeff[self.PU], self.pv.coeff[self.PV]
        weights = self.sign * cu[..., :, None] * cv[..., None, :]
        columns = du[..., :, None] * cols + dv[..., None, :]
        nentries = self.PU.size
        entry = np.repeat(np.arange(nentries), 4)
        # duplicate (entry, column) pairs are summed
        combination = scipy.sparse.csr_matrix((weights.ravel(), (entry, columns.ravel())), shape=(nentries, rows * cols))
        combination.eliminate_zeros()
        return combination


@lru_cache(maxsize=64)
def block_layouts(orders: Orders) -> Dict[str, BlockLayout]:
    return {name: BlockLayout(name, orders) for name in COMPUTED_BLOCKS}


class ElementMatrices:
    def __init__(self, orders: Orders, blocks: Dict[str, np.ndarray], counts: Dict[str, int] = None,
                 backend: str = '', transformed: bool = False):
        self.orders = orders
        self.blocks = blocks
        self.counts = counts or {}
        self.backend = backend
        self.transformed = transformed

    def __getattr__(self, name):
        if name in BLOCK_NAMES and 'blocks' in self.__dict__:
            return self.__dict__['blocks'][name]
        raise AttributeError(name)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.blocks[name]

    def full(self, kind: str) -> np.ndarray:
        """The local stiffness ('S') or mass ('M') matrix, E_u DOFs first."""
        b = self.blocks
        return np.block([[b[kind + '_uu'], b[kind + '_uv']], [b[kind + '_vu'], b[kind + '_vv']]])

    def check_finite(self, index: int = None):
        for name, block in self.blocks.items():
            if not np.all(np.isfinite(block)):
                raise AssemblyError('non-finite entries in %s of element %s' % (name, index))

    def __repr__(self):
        return 'ElementMatrices(M=%d, N=%d, backend=%s, transformed=%s)' % (self.orders.M, self.orders.N, self.backend, self.transformed)


class CouplingFactors:
    """
    Coupling factors times the tensor quadrature weights on the (nq, nq)
    grid, plus the Chebyshev samples at the 1-D nodes.
    """

    def __init__(self, elem: CurvedQuadElement, nodes: np.ndarray, materials: Materials, orders: Orders, nq: int,
                 index: Optional[int] = None):
        ru, rv, weights = tensor_grid(nq, nq)
        s = sample_element(elem, nodes, ru.nodes, rv.nodes)
        bad = s.J <= 0
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            raise GeometryError('Jacobian determinant %g at a quadrature point' % s.J[i, j], index, (float(ru.nodes[i]), float(rv.nodes[j])))
        eps = materials.eps_r(s.x, s.y)
        mu = materials.mu_r(s.x, s.y)
        w_j = weights / s.J
        self.factors = {
            'Ks': w_j / mu,
            'Kuu': w_j * eps * (s.x_v ** 2 + s.y_v ** 2),
            'Kuv': w_j * eps * (s.x_u * s.x_v + s.y_u * s.y_v),
            'Kvv': w_j * eps * (s.x_u ** 2 + s.y_u ** 2),
        }
        for name, c in self.factors.items():
            bad = ~np.isfinite(c)
            if np.any(bad):
                i, j = np.argwhere(bad)[0]
                raise IntegrationError((float(ru.nodes[i]), float(rv.nodes[j])))
        top = 2 * max(orders.M, orders.N) + 2
        self.samples_u = node_samples(nq, top)
        self.samples_v = node_samples(nq, top)


@lru_cache(maxsize=32)
def node_samples(nq: int, top: int) -> Dict[PolyFamily, np.ndarray]:
    """Read-only tables of every family, degrees 0..top, at the nq Gauss nodes."""
    nodes = gauss_legendre(nq).nodes
    samples = {}
    for fam in PolyFamily:
        table = chebyshev_table(fam, top, nodes)
        table.setflags(write=False)
        samples[fam] = table
    return samples


def _finish(orders: Orders, computed: Dict[str, np.ndarray], counts: Dict[str, int], backend: str) -> ElementMatrices:
    blocks = dict(computed)
    for name, source in TRANSPOSED_BLOCKS.items():
        blocks[name] = blocks[source].T.copy()
    return ElementMatrices(orders, {name: blocks[name] for name in BLOCK_NAMES}, counts, backend)


def assemble_direct_element(elem: CurvedQuadElement, nodes: np.ndarray, materials: Materials, orders: Orders, nq: int,
                            index: Optional[int] = None, coupling: CouplingFactors = None) -> ElementMatrices:
    """Every distinct entry by one full 2-D quadrature of its integrand."""
    coupling = coupling or CouplingFactors(elem, nodes, materials, orders, nq, index)
    computed = {}
    counts = {}
    for name, layout in block_layouts(orders).items():
        fu = layout.pu.values(coupling.samples_u)
        fv = layout.pv.values(coupling.samples_v)
        integrals, count = integrate_tensor_products(fu, fv, coupling.factors[layout.kernel])
        computed[name] = layout.sign * integrals[layout.PU, layout.PV]
        counts[name] = count
    return _finish(orders, computed, counts, 'direct')


@dataclass
class KernelTable:
    Ks: np.ndarray
    Kuu: np.ndarray
    Kuv: np.ndarray
    Kvv: np.ndarray
    counts: Dict[str, int]

    def __getitem__(self, name: str) -> np.ndarray:
        return getattr(self, name)


def kernel_shapes(orders: Orders) -> Dict[str, Tuple[int, int]]:
    M, N = orders.M, orders.N
    return {
        'Ks': (2 * M + 1, 2 * N + 1),
        'Kuu': (2 * M + 1, 2 * N + 1),
        'Kuv': (2 * M, 2 * N),
        'Kvv': (2 * M + 1, 2 * N + 1),
    }


def compute_kernel_tables(elem: CurvedQuadElement, nodes: np.ndarray, materials: Materials, orders: Orders, nq: int,
                          index: Optional[int] = None, coupling: CouplingFactors = None) -> KernelTable:
    coupling = coupling or CouplingFactors(elem, nodes, materials, orders, nq, index)
    tables = {}
    counts = {}
    for name, (rows, cols) in kernel_shapes(orders).items():
        fam_u, fam_v, _ = KERNELS[name]
        fu = coupling.samples_u[fam_u][:rows]
        fv = coupling.samples_v[fam_v][:cols]
        tables[name], counts[name] = integrate_tensor_products(fu, fv, coupling.factors[name])
    return KernelTable(counts=counts, **tables)


def assemble_p2s_element(kernels: KernelTable, orders: Orders) -> ElementMatrices:
    """
    Each entry is sign * sum over at most 2x2 terms of coeff_u * coeff_v * K[deg_u, deg_v],
    one product of the cached combination matrix with the raveled table per block.
    """
    computed = {}
    shapes = kernel_shapes(orders)
    for name, layout in block_layouts(orders).items():
        table = kernels[layout.kernel]
        if table.shape != shapes[layout.kernel]:
            raise ContractViolation('assemble_p2s_element', 'kernel table %s has shape %r, expected %r for M=%d N=%d'
                                    % (layout.kernel, table.shape, shapes[layout.kernel], orders.M, orders.N))
        computed[name] = (layout.combination @ table.ravel()).reshape(layout.shape)
    return _finish(orders, computed, dict(kernels.counts), 'p2s')


def assemble_element(mesh: Mesh, index: int, orders: Orders, nq: int, backend: str) -> ElementMatrices:
    elem = mesh.elements[index]
    if backend == 'direct':
        em = assemble_direct_element(elem, mesh.nodes, mesh.materials, orders, nq, index)
    elif backend == 'p2s':
        kernels = compute_kernel_tables(elem, mesh.nodes, mesh.materials, orders, nq, index)
        em = assemble_p2s_element(kernels, orders)
    else:
        raise ContractViolation('assemble_element', 'unknown backend %r' % backend)
    em.check_finite(index)
    return em


class ConformingTransform:
    """
    Change of basis on the T-indexed axis of each block:
    e_0 = (T_0 - T_1)/2, e_1 = (T_0 + T_1)/2, e_n = T_n - T_(n mod 2).
    """

    def __init__(self, orders: Orders):
        self.orders = orders
        self.R_N = conformity_matrix(orders.N)
        self.R_M = conformity_matrix(orders.M)
        self.Q_u = scipy.sparse.kron(scipy.sparse.identity(orders.M), self.R_N, format='csr')
        self.Q_v = scipy.sparse.kron(self.R_M, scipy.sparse.identity(orders.N), format='csr')

    @staticmethod
    def _congruence(qa, x: np.ndarray, qb) -> np.ndarray:
        # qa^T x qb
        return np.asarray((qb.T @ np.asarray(qa.T @ x).T).T)

    def apply(self, em: ElementMatrices) -> ElementMatrices:
        if em.transformed:
            raise ContractViolation('conforming_transform', 'element matrices already transformed')
        blocks = {}
        for kind in ('S', 'M'):
            uu = self._congruence(self.Q_u, em[kind + '_uu'], self.Q_u)
            vv = self._congruence(self.Q_v, em[kind + '_vv'], self.Q_v)
            blocks[kind + '_uu'] = 0.5 * (uu + uu.T)
            blocks[kind + '_vv'] = 0.5 * (vv + vv.T)
            blocks[kind + '_uv'] = self._congruence(self.Q_u, em[kind + '_uv'], self.Q_v)
            blocks[kind + '_vu'] = blocks[kind + '_uv'].T.copy()
        return ElementMatrices(em.orders, {name: blocks[name] for name in BLOCK_NAMES}, em.counts, em.backend, True)


def conformity_matrix(n: int) -> scipy.sparse.csr_matrix:
    """(n+1) x (n+1) matrix whose columns are the new functions in T-coefficients."""
    rows = [0, 1, 0, 1]
    cols = [0, 0, 1, 1]
    vals = [0.5, -0.5, 0.5, 0.5]
    for k in range(2, n + 1):
        rows += [k, k % 2]
        cols += [k, k]
        vals += [1.0, -1.0]
    return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n + 1, n + 1))


@lru_cache(maxsize=64)
def conforming_transform(orders: Orders) -> ConformingTransform:
    return ConformingTransform(orders)


def _element_work(mesh: Mesh, index: int, orders: Orders, nq: int, backend: str) -> ElementMatrices:
    return conforming_transform(orders).apply(assemble_element(mesh, index, orders, nq, backend))


def assemble_elements(mesh: Mesh, orders: Orders, nq: int, backend: str, progress: bool = False) -> List[ElementMatrices]:
    indices = range(len(mesh.elements))
    if progress:
        indices = tqdm.tqdm(indices, desc='%s fill' % backend, unit='elem')
    return [_element_work(mesh, e, orders, nq, backend) for e in indices]


async def assemble_elements_parallel(mesh: Mesh, orders: Orders, nq: int, backend: str, threads: int) -> List[ElementMatrices]:
    """Element work on a thread pool; results come back in element order."""
    loop = asyncio.get_running_loop()
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [loop.run_in_executor(pool, _element_work, mesh, e, orders, nq, backend) for e in range(len(mesh.elements))]
        return list(await asyncio.gather(*futures))


class GlobalSystem:
    def __init__(self, S: np.ndarray, M: np.ndarray, dof_map: DofMap, orders: Orders, counts: Dict[str, int] = None):
        self.S = S
        self.M = M
        self.dof_map = dof_map
        self.orders = orders
        self.counts = counts or {}

    @property
    def size(self) -> int:
        return self.S.shape[0]

    def __repr__(self):
        return 'GlobalSystem(size=%d, M=%d, N=%d)' % (self.size, self.orders.M, self.orders.N)


def _asymmetry(A: np.ndarray) -> float:
    scale = np.max(np.abs(A)) if A.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(A - A.T)) / scale)


def assemble_global(mesh: Mesh, dof_map: DofMap, elements: Sequence[ElementMatrices]) -> GlobalSystem:
    """Signed scatter-add of the transformed element matrices over the free DOFs."""
    if len(elements) != len(mesh.elements):
        raise AssemblyError('expected %d element matrices, got %d' % (len(mesh.elements), len(elements)))
    n = dof_map.nfree
    S = np.zeros((n, n))
    M = np.zeros((n, n))
    counts: Dict[str, int] = {}
    orders = elements[0].orders if elements else Orders(dof_map.M, dof_map.N)
    for e, em in enumerate(elements):
        if not em.transformed:
            raise ContractViolation('assemble_global', 'element %d is not conforming-transformed' % e)
        index = dof_map.free_index[dof_map.elements[e].local_index()]
        sign = dof_map.elements[e].local_sign()
        keep = index >= 0
        rows = index[keep]
        signs = sign[keep]
        outer = signs[:, None] * signs[None, :]
        # global indices are distinct within one element
        block = np.ix_(rows, rows)
        S[block] += outer * em.full('S')[np.ix_(keep, keep)]
        M[block] += outer * em.full('M')[np.ix_(keep, keep)]
        for name, count in em.counts.items():
            counts[name] = counts.get(name, 0) + count
    for label, A in (('stiffness', S), ('mass', M)):
        asym = _asymmetry(A)
        if asym > 1e-10:
            raise AssemblyError('%s matrix asymmetry %.3e exceeds 1e-10, sign or index mismatch' % (label, asym))
    S = 0.5 * (S + S.T)
    M = 0.5 * (M + M.T)
    logger.debug('Assembled global system with %d free DOFs' % n)
    return GlobalSystem(S, M, dof_map, orders, counts)


def assemble_system(mesh: Mesh, orders: Orders, nq: int, backend: str, progress: bool = False) -> GlobalSystem:
    """Connectivity, element fill and global scatter on the calling thread."""
    dof_map = build_connectivity(mesh, orders.M, orders.N)
    return assemble_global(mesh, dof_map, assemble_elements(mesh, orders, nq, backend, progress))
