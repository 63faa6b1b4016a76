"""
Curved quadrilateral meshes with Lagrangian isoparametric geometry.

Element geometry nodes sit on an equispaced (p+1) x (p+1) reference grid,
numbered lexicographically with u running fastest. Local edges:
0: v=-1, 1: u=+1, 2: v=+1, 3: u=-1.
"""
import json
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Sequence, Tuple, Union

import numpy as np

from chebfem import logger
from chebfem.common.exceptions import GeometryError, MeshFormatError
from chebfem.expr import CoefficientFunction
from chebfem.quadrature import gauss_legendre

MESH_FORMAT_VERSION = 1

CURVED_TOP = '-0.2*(x^2-1)^2+1'
CURVED_RIGHT = '0.2*(y^2-1)^2+1'
CURVED_EPS_R = '2*exp(x+y+2)'
CURVED_MU_R = '1'


@dataclass
class MapSample:
    x: np.ndarray
    y: np.ndarray
    x_u: np.ndarray
    x_v: np.ndarray
    y_u: np.ndarray
    y_v: np.ndarray
    J: np.ndarray


def lagrange_nodes(p: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, p + 1)


def lagrange_basis(p: int, u) -> Tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the 1-D Lagrange polynomials, shape (p+1, len(u))."""
    xk = lagrange_nodes(p)
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    values = np.ones((p + 1, u.shape[0]))
    derivs = np.zeros((p + 1, u.shape[0]))
    for i in range(p + 1):
        for k in range(p + 1):
            if k == i:
                continue
            values[i] *= (u - xk[k]) / (xk[i] - xk[k])
            term = np.full(u.shape[0], 1.0 / (xk[i] - xk[k]))
            for q in range(p + 1):
                if q == i or q == k:
                    continue
                term *= (u - xk[q]) / (xk[i] - xk[q])
            derivs[i] += term
    return values, derivs


class CurvedQuadElement:
    def __init__(self, order: int, nodes: Sequence[int]):
        self.order = order
        self.nodes = tuple(int(n) for n in nodes)

    def local(self, i: int, j: int) -> int:
        return self.nodes[j * (self.order + 1) + i]

    def edge_nodes(self, edge: int) -> Tuple[int, ...]:
        """Geometry nodes of a local edge, ordered along increasing local parameter."""
        p = self.order
        if edge == 0:
            return tuple(self.local(i, 0) for i in range(p + 1))
        if edge == 1:
            return tuple(self.local(p, j) for j in range(p + 1))
        if edge == 2:
            return tuple(self.local(i, p) for i in range(p + 1))
        if edge == 3:
            return tuple(self.local(0, j) for j in range(p + 1))
        raise MeshFormatError('invalid local edge %d' % edge)

    def vertices(self) -> Tuple[int, int, int, int]:
        p = self.order
        return (self.local(0, 0), self.local(p, 0), self.local(p, p), self.local(0, p))

    def __repr__(self):
        return 'CurvedQuadElement(order=%d, nodes=%r)' % (self.order, self.nodes)


class Materials:
    def __init__(self, eps_r: Union[str, CoefficientFunction] = '1', mu_r: Union[str, CoefficientFunction] = '1'):
        self.eps_r = eps_r if isinstance(eps_r, CoefficientFunction) else CoefficientFunction(eps_r)
        self.mu_r = mu_r if isinstance(mu_r, CoefficientFunction) else CoefficientFunction(mu_r)

    def scaled_eps(self, factor: float) -> 'Materials':
        return Materials('%r*(%s)' % (float(factor), self.eps_r.text), self.mu_r)

    def to_dict(self) -> Dict[str, str]:
        return {'eps_r': self.eps_r.text, 'mu_r': self.mu_r.text}


EdgeKey = Tuple[int, int]


class Mesh:
    def __init__(self, nodes, elements: List[CurvedQuadElement], boundary_edges, materials: Materials):
        self.nodes = np.asarray(nodes, dtype=np.float64).reshape(-1, 2)
        self.elements = list(elements)
        self.boundary_edges: FrozenSet[Tuple[int, int]] = frozenset((int(e), int(k)) for e, k in boundary_edges)
        self.materials = materials

    def element_coordinates(self, index: int) -> np.ndarray:
        return self.nodes[list(self.elements[index].nodes)]

    def edge_owners(self) -> Dict[EdgeKey, List[Tuple[int, int]]]:
        """Edges keyed by their sorted endpoint vertex pair."""
        owners: Dict[EdgeKey, List[Tuple[int, int]]] = {}
        for e, elem in enumerate(self.elements):
            for k in range(4):
                seq = elem.edge_nodes(k)
                key = (min(seq[0], seq[-1]), max(seq[0], seq[-1]))
                owners.setdefault(key, []).append((e, k))
        return owners

    def validate(self):
        nnodes = self.nodes.shape[0]
        if not np.all(np.isfinite(self.nodes)):
            raise MeshFormatError('non-finite node coordinates')
        for e, elem in enumerate(self.elements):
            if elem.order < 1:
                raise MeshFormatError('geometric order must be at least 1', e)
            if len(elem.nodes) != (elem.order + 1) ** 2:
                raise MeshFormatError('expected %d nodes, got %d' % ((elem.order + 1) ** 2, len(elem.nodes)), e)
            for n in elem.nodes:
                if n < 0 or n >= nnodes:
                    raise MeshFormatError('dangling node reference %d' % n, e)
            check_orientation(elem, self.nodes, e)
        owners = self.edge_owners()
        single = set()
        for key, incident in owners.items():
            if len(incident) > 2:
                raise MeshFormatError('edge %r shared by %d elements' % (key, len(incident)), incident[0][0])
            if len(incident) == 1:
                single.add(incident[0])
                continue
            (ea, ka), (eb, kb) = incident
            seq_a = self.elements[ea].edge_nodes(ka)
            seq_b = self.elements[eb].edge_nodes(kb)
            if seq_a != seq_b and seq_a != tuple(reversed(seq_b)):
                raise MeshFormatError('shared edge geometry differs from element %d' % ea, eb)
        for e, k in self.boundary_edges:
            if e < 0 or e >= len(self.elements) or k not in (0, 1, 2, 3):
                raise MeshFormatError('invalid boundary edge (%d, %d)' % (e, k), e)
        if single != set(self.boundary_edges):
            missing = sorted(single - set(self.boundary_edges))
            extra = sorted(set(self.boundary_edges) - single)
            element = (missing or extra)[0][0]
            raise MeshFormatError('boundary_edges must list exactly the unshared edges (missing %r, extra %r)' % (missing, extra), element)
        return self


def sample_element(elem: CurvedQuadElement, nodes: np.ndarray, u_points, v_points) -> MapSample:
    """Geometry and Jacobian on the tensor grid u_points x v_points, arrays of shape (nu, nv)."""
    p = elem.order
    coords = np.asarray(nodes, dtype=np.float64)[list(elem.nodes)].reshape(p + 1, p + 1, 2)
    lu, dlu = lagrange_basis(p, u_points)
    lv, dlv = lagrange_basis(p, v_points)
    # coords[j, i] belongs to reference position (u_i, v_j)
    xn = coords[:, :, 0]
    yn = coords[:, :, 1]
    x = np.einsum('ia,jb,ji->ab', lu, lv, xn)
    y = np.einsum('ia,jb,ji->ab', lu, lv, yn)
    x_u = np.einsum('ia,jb,ji->ab', dlu, lv, xn)
    y_u = np.einsum('ia,jb,ji->ab', dlu, lv, yn)
    x_v = np.einsum('ia,jb,ji->ab', lu, dlv, xn)
    y_v = np.einsum('ia,jb,ji->ab', lu, dlv, yn)
    return MapSample(x, y, x_u, x_v, y_u, y_v, x_u * y_v - x_v * y_u)


def map_and_jacobian(elem: CurvedQuadElement, nodes: np.ndarray, u: float, v: float) -> MapSample:
    s = sample_element(elem, nodes, [u], [v])
    return MapSample(*(float(getattr(s, f)[0, 0]) for f in ('x', 'y', 'x_u', 'x_v', 'y_u', 'y_v', 'J')))


def check_orientation(elem: CurvedQuadElement, nodes: np.ndarray, index: int = None):
    rule = gauss_legendre(elem.order + 1)
    sample = sample_element(elem, nodes, rule.nodes, rule.nodes)
    bad = sample.J <= 0
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise GeometryError('Jacobian determinant %g is not positive' % sample.J[i, j], index, (float(rule.nodes[i]), float(rule.nodes[j])))


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def load_mesh(data: Union[bytes, str]) -> Mesh:
    try:
        doc = json.loads(data)
    except ValueError as e:
        raise MeshFormatError('invalid JSON: %s' % e)
    if not isinstance(doc, dict):
        raise MeshFormatError('mesh document must be a JSON object')
    if doc.get('version') != MESH_FORMAT_VERSION:
        raise MeshFormatError('unsupported mesh version %r' % doc.get('version'))
    for field in ('nodes', 'elements', 'boundary_edges', 'materials'):
        if field not in doc:
            raise MeshFormatError('missing field %r' % field)
    try:
        nodes = np.array(doc['nodes'], dtype=np.float64)
    except (TypeError, ValueError):
        raise MeshFormatError('nodes must be a list of [x, y] pairs')
    if nodes.ndim != 2 or nodes.shape[1] != 2:
        raise MeshFormatError('nodes must be a list of [x, y] pairs')
    elements = []
    if not isinstance(doc['elements'], list):
        raise MeshFormatError('elements must be a list')
    for e, raw in enumerate(doc['elements']):
        if not isinstance(raw, dict) or 'order' not in raw or 'nodes' not in raw:
            raise MeshFormatError('element needs order and nodes', e)
        if not isinstance(raw['nodes'], list):
            raise MeshFormatError('element nodes must be a list of node ids', e)
        if not _is_int(raw['order']) or not all(_is_int(n) for n in raw['nodes']):
            raise MeshFormatError('order and node ids must be integers', e)
        elements.append(CurvedQuadElement(raw['order'], raw['nodes']))
    boundary = []
    if not isinstance(doc['boundary_edges'], list):
        raise MeshFormatError('boundary_edges must be a list')
    for entry in doc['boundary_edges']:
        if not isinstance(entry, list) or len(entry) != 2 or not all(_is_int(v) for v in entry):
            raise MeshFormatError('boundary edge must be [element, local_edge] integers, got %r' % (entry,))
        boundary.append((entry[0], entry[1]))
    mats = doc['materials']
    if not isinstance(mats, dict) or not isinstance(mats.get('eps_r'), str) or not isinstance(mats.get('mu_r'), str):
        raise MeshFormatError('materials need eps_r and mu_r expressions')
    mesh = Mesh(nodes, elements, boundary, Materials(mats['eps_r'], mats['mu_r']))
    mesh.validate()
    logger.debug('Loaded mesh with %d nodes and %d elements' % (mesh.nodes.shape[0], len(mesh.elements)))
    return mesh


def dump_mesh(mesh: Mesh) -> bytes:
    doc = {
        'version': MESH_FORMAT_VERSION,
        'nodes': [[float(x), float(y)] for x, y in mesh.nodes],
        'elements': [{'order': elem.order, 'nodes': list(elem.nodes)} for elem in mesh.elements],
        'boundary_edges': [[e, k] for e, k in sorted(mesh.boundary_edges)],
        'materials': mesh.materials.to_dict(),
    }
    return json.dumps(doc, indent=1).encode()


def _structured_mesh(x0: float, x1: float, y0: float, y1: float, bottom: str, top: str, left: str, right: str,
                     nx: int, ny: int, p: int, materials: Materials) -> Mesh:
    """
    Transfinite (Coons patch) mesh of the region between y = bottom(x) and
    y = top(x) for x in [x0, x1], and x = left(y), x = right(y) for y in [y0, y1].
    """
    if nx < 1 or ny < 1 or p < 1:
        raise MeshFormatError('nx, ny and p must be at least 1')
    f_bottom = CoefficientFunction(bottom)
    f_top = CoefficientFunction(top)
    f_left = CoefficientFunction(left)
    f_right = CoefficientFunction(right)

    ni = nx * p + 1
    nj = ny * p + 1
    s = np.arange(ni) / (ni - 1)
    t = np.arange(nj) / (nj - 1)
    xs = x0 + (x1 - x0) * s
    yt = y0 + (y1 - y0) * t
    zeros_s = np.zeros_like(s)
    zeros_t = np.zeros_like(t)
    bottom_xy = np.stack([xs, f_bottom(xs, zeros_s)], axis=-1)
    top_xy = np.stack([xs, f_top(xs, zeros_s)], axis=-1)
    left_xy = np.stack([f_left(zeros_t, yt), yt], axis=-1)
    right_xy = np.stack([f_right(zeros_t, yt), yt], axis=-1)

    S = s[None, :, None]
    T = t[:, None, None]
    coons = ((1 - T) * bottom_xy[None, :, :] + T * top_xy[None, :, :]
             + (1 - S) * left_xy[:, None, :] + S * right_xy[:, None, :]
             - ((1 - S) * (1 - T) * bottom_xy[0] + S * (1 - T) * bottom_xy[-1]
                + (1 - S) * T * top_xy[0] + S * T * top_xy[-1]))
    # coons[J, I] is grid node J * ni + I
    nodes = coons.reshape(-1, 2)

    elements = []
    boundary = []
    for ey in range(ny):
        for ex in range(nx):
            ids = [(ey * p + j) * ni + (ex * p + i) for j in range(p + 1) for i in range(p + 1)]
            e = len(elements)
            elements.append(CurvedQuadElement(p, ids))
            if ey == 0:
                boundary.append((e, 0))
            if ex == nx - 1:
                boundary.append((e, 1))
            if ey == ny - 1:
                boundary.append((e, 2))
            if ex == 0:
                boundary.append((e, 3))
    return Mesh(nodes, elements, boundary, materials).validate()


def generate_curved_domain(nx: int = 4, ny: int = 4, p: int = 4, top: str = CURVED_TOP, right: str = CURVED_RIGHT,
                          bottom: str = '-1', left: str = '-1', eps_r: str = CURVED_EPS_R, mu_r: str = CURVED_MU_R) -> Mesh:
    """
    The curved cavity bounded by x = -1, y = -1, the right curve x = g(y)
    and the top curve y = f(x), filled with eps_r = 2 exp(x + y + 2).
    """
    mesh = _structured_mesh(-1.0, 1.0, -1.0, 1.0, bottom, top, left, right, nx, ny, p, Materials(eps_r, mu_r))
    logger.debug('Generated curved domain: %d elements of order %d' % (len(mesh.elements), p))
    return mesh


def generate_square_domain(a: float = 2.0, b: float = 2.0, nx: int = 1, ny: int = 1, p: int = 1,
                           eps_r: str = '1', mu_r: str = '1') -> Mesh:
    """Rectangle [-a/2, a/2] x [-b/2, b/2], homogeneous by default."""
    ha = repr(0.5 * float(a))
    hb = repr(0.5 * float(b))
    return _structured_mesh(-0.5 * a, 0.5 * a, -0.5 * b, 0.5 * b,
                            '-' + hb, hb, '-' + ha, ha, nx, ny, p, Materials(eps_r, mu_r))


def generate_random_element(rng: np.random.Generator, p: int = 3, amplitude: float = 0.12, attempts: int = 50) -> Mesh:
    """
    One curved element: the reference grid stretched, rotated and shifted
    at random, every geometry node jittered by up to `amplitude` times the
    node spacing, with random smooth positive materials.
    """
    g = lagrange_nodes(p)
    U, V = np.meshgrid(g, g)
    spacing = 2.0 / p
    for _ in range(attempts):
        sx, sy = rng.uniform(0.5, 2.0, size=2)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        ref = np.stack([sx * U.ravel(), sy * V.ravel()], axis=-1)
        ref += amplitude * spacing * rng.uniform(-1.0, 1.0, size=ref.shape) * np.array([sx, sy])
        nodes = ref @ rot.T + rng.uniform(-1.0, 1.0, size=2)
        elem = CurvedQuadElement(p, range((p + 1) ** 2))
        try:
            check_orientation(elem, nodes, 0)
        except GeometryError:
            continue
        a, b, c, d = rng.uniform(0.5, 2.0), rng.uniform(0.1, 1.0), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)
        m0, m1 = rng.uniform(0.5, 2.0), rng.uniform(0.0, 0.5)
        materials = Materials('%r+%r*exp(%r*x+%r*y)' % (a, b, c, d), '%r+%r*y^2' % (m0, m1))
        return Mesh(nodes, [elem], [(0, k) for k in range(4)], materials).validate()
    raise GeometryError('no valid random element after %d attempts' % attempts)
