"""
Global numbering of the hierarchical curl-conforming DOFs.

After the conforming transform every T-direction index k of an element
block means: k=0 trace on the lower end, k=1 trace on the upper end,
k>=2 zero trace on both ends. So the E_u modes (m, 0) and (m, 1) live on
local edges 0 and 2, the E_v modes (0, n) and (1, n) on local edges 3 and 1.
"""
from typing import Dict, List, Tuple

import numpy as np

from chebfem import logger
from chebfem.common.exceptions import ContractViolation, NonConformingMeshError
from chebfem.mesh import Mesh

# local edge -> (block, T-direction slot)
EDGE_SLOTS = {0: ('u', 0), 2: ('u', 1), 3: ('v', 0), 1: ('v', 1)}


class ElementDofs:
    def __init__(self, M: int, N: int):
        self.u_index = np.full((M, N + 1), -1, dtype=np.int64)
        self.u_sign = np.ones((M, N + 1), dtype=np.float64)
        self.v_index = np.full((M + 1, N), -1, dtype=np.int64)
        self.v_sign = np.ones((M + 1, N), dtype=np.float64)

    def local_index(self) -> np.ndarray:
        return np.concatenate([self.u_index.ravel(), self.v_index.ravel()])

    def local_sign(self) -> np.ndarray:
        return np.concatenate([self.u_sign.ravel(), self.v_sign.ravel()])

    def edge_dofs(self, edge: int) -> Tuple[np.ndarray, np.ndarray]:
        block, slot = EDGE_SLOTS[edge]
        if block == 'u':
            return self.u_index[:, slot], self.u_sign[:, slot]
        return self.v_index[slot, :], self.v_sign[slot, :]


class DofMap:
    def __init__(self, M: int, N: int, elements: List[ElementDofs], ndofs: int, constrained: List[int]):
        self.M = M
        self.N = N
        self.elements = elements
        self.ndofs = ndofs
        self.constrained = sorted(set(constrained))
        mask = np.ones(ndofs, dtype=bool)
        mask[self.constrained] = False
        self.free = np.nonzero(mask)[0]
        self.free_index = np.full(ndofs, -1, dtype=np.int64)
        self.free_index[self.free] = np.arange(self.free.shape[0])

    @property
    def nfree(self) -> int:
        return int(self.free.shape[0])

    def __repr__(self):
        return 'DofMap(M=%d, N=%d, ndofs=%d, free=%d)' % (self.M, self.N, self.ndofs, self.nfree)


def edge_mode_sign(mode: int, forward: bool) -> float:
    """
    Sign of a tangential edge mode U_mode relative to the global edge
    direction. Reversed traversal flips the tangent and maps U_m(t) to
    (-1)^m U_m(-t), hence (-1)^(m+1).
    """
    if forward:
        return 1.0
    return -1.0 if mode % 2 == 0 else 1.0


def check_conforming(mesh: Mesh):
    vertices = set()
    for elem in mesh.elements:
        vertices.update(elem.vertices())
    owners = mesh.edge_owners()
    for key, incident in owners.items():
        if len(incident) > 2:
            raise NonConformingMeshError('edge shared by more than two elements', [e for e, _ in incident])
        if len(incident) == 1 and incident[0] not in mesh.boundary_edges:
            raise NonConformingMeshError('unmatched interior edge %r' % (key,), [incident[0][0]])
        for e, k in incident:
            inner = set(mesh.elements[e].edge_nodes(k)[1:-1])
            hanging = inner & vertices
            if hanging:
                raise NonConformingMeshError('hanging node %d on edge %r' % (sorted(hanging)[0], key), [e])


def build_connectivity(mesh: Mesh, M: int, N: int) -> DofMap:
    if M < 1 or N < 1:
        raise ContractViolation('build_connectivity', 'orders must be positive, got M=%d N=%d' % (M, N))
    check_conforming(mesh)
    edofs = [ElementDofs(M, N) for _ in mesh.elements]
    owners = mesh.edge_owners()
    edge_ids: Dict[Tuple[int, int], np.ndarray] = {}
    nextid = 0
    for key in sorted(owners):
        incident = owners[key]
        counts = set(M if EDGE_SLOTS[k][0] == 'u' else N for _, k in incident)
        if len(counts) != 1:
            raise NonConformingMeshError('edge %r joins a u-edge and a v-edge with M != N' % (key,), [e for e, _ in incident])
        nmodes = counts.pop()
        ids = np.arange(nextid, nextid + nmodes)
        nextid += nmodes
        edge_ids[key] = ids
        for e, k in incident:
            seq = mesh.elements[e].edge_nodes(k)
            forward = seq[0] < seq[-1]
            signs = np.array([edge_mode_sign(q, forward) for q in range(nmodes)])
            block, slot = EDGE_SLOTS[k]
            if block == 'u':
                edofs[e].u_index[:, slot] = ids
                edofs[e].u_sign[:, slot] = signs
            else:
                edofs[e].v_index[slot, :] = ids
                edofs[e].v_sign[slot, :] = signs

    for dofs in edofs:
        count = M * (N - 1)
        dofs.u_index[:, 2:] = np.arange(nextid, nextid + count).reshape(M, N - 1)
        nextid += count
        count = (M - 1) * N
        dofs.v_index[2:, :] = np.arange(nextid, nextid + count).reshape(M - 1, N)
        nextid += count

    constrained = []
    for e, k in mesh.boundary_edges:
        ids, _ = edofs[e].edge_dofs(k)
        constrained.extend(int(i) for i in ids)

    dof_map = DofMap(M, N, edofs, nextid, constrained)
    logger.debug('Connectivity: %d DOFs, %d constrained' % (dof_map.ndofs, len(dof_map.constrained)))
    return dof_map


def discrete_gradient_count(mesh: Mesh, M: int, N: int) -> int:
    """
    Dimension of the continuous scalar space of degree (M, N) per element
    with zero boundary trace. Its gradients span the curl-curl nullspace.
    """
    boundary_vertices = set()
    for e, k in mesh.boundary_edges:
        seq = mesh.elements[e].edge_nodes(k)
        boundary_vertices.update((seq[0], seq[-1]))
    vertices = set()
    for elem in mesh.elements:
        vertices.update(elem.vertices())
    count = len(vertices - boundary_vertices)
    for key, incident in mesh.edge_owners().items():
        if len(incident) == 2:
            _, k = incident[0]
            count += (M - 1) if EDGE_SLOTS[k][0] == 'u' else (N - 1)
    count += len(mesh.elements) * (M - 1) * (N - 1)
    return count
