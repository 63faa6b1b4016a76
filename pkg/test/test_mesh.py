import json

import numpy as np
import pytest

from chebfem.common.exceptions import ExpressionSyntaxError, GeometryError, MeshFormatError
from chebfem.mesh import (CURVED_EPS_R, MESH_FORMAT_VERSION, CurvedQuadElement, Materials, Mesh, check_orientation,
                          dump_mesh, generate_random_element, generate_square_domain, lagrange_basis, load_mesh,
                          map_and_jacobian, sample_element)

UNIT_DOC = {
    'version': MESH_FORMAT_VERSION,
    'nodes': [[-1, -1], [1, -1], [-1, 1], [1, 1]],
    'elements': [{'order': 1, 'nodes': [0, 1, 2, 3]}],
    'boundary_edges': [[0, 0], [0, 1], [0, 2], [0, 3]],
    'materials': {'eps_r': '1', 'mu_r': '1'},
}


def unit_doc(**changes):
    doc = json.loads(json.dumps(UNIT_DOC))
    doc.update(changes)
    return json.dumps(doc)


class TestLagrange:
    @pytest.mark.parametrize('p', [1, 2, 4, 6])
    def test_partition_of_unity(self, p):
        u = np.linspace(-1.0, 1.0, 17)
        values, derivs = lagrange_basis(p, u)
        np.testing.assert_allclose(values.sum(axis=0), 1.0, atol=1e-13)
        np.testing.assert_allclose(derivs.sum(axis=0), 0.0, atol=1e-11)

    def test_interpolates_nodes(self):
        values, _ = lagrange_basis(3, np.linspace(-1.0, 1.0, 4))
        np.testing.assert_allclose(values, np.eye(4), atol=1e-15)


class TestElementMap:
    def test_identity_map(self, identity_mesh):
        elem = identity_mesh.elements[0]
        s = map_and_jacobian(elem, identity_mesh.nodes, 0.3, -0.7)
        assert s.x == pytest.approx(0.3, abs=1e-15)
        assert s.y == pytest.approx(-0.7, abs=1e-15)
        assert (s.x_u, s.x_v, s.y_u, s.y_v) == pytest.approx((1.0, 0.0, 0.0, 1.0), abs=1e-15)
        assert s.J == pytest.approx(1.0, abs=1e-15)

    def test_affine_map(self):
        mesh = generate_square_domain(a=4.0, b=2.0)
        s = map_and_jacobian(mesh.elements[0], mesh.nodes, 0.5, 0.5)
        assert (s.x, s.y) == pytest.approx((1.0, 0.5), abs=1e-15)
        assert s.J == pytest.approx(2.0, abs=1e-15)

    def test_derivatives_match_finite_differences(self, curved_mesh):
        elem = curved_mesh.elements[15]
        h = 1e-6
        for u, v in [(0.1, 0.2), (-0.8, 0.9), (0.95, -0.3)]:
            s = map_and_jacobian(elem, curved_mesh.nodes, u, v)
            pu = map_and_jacobian(elem, curved_mesh.nodes, u + h, v)
            mu = map_and_jacobian(elem, curved_mesh.nodes, u - h, v)
            pv = map_and_jacobian(elem, curved_mesh.nodes, u, v + h)
            mv = map_and_jacobian(elem, curved_mesh.nodes, u, v - h)
            assert s.x_u == pytest.approx((pu.x - mu.x) / (2 * h), abs=1e-6)
            assert s.y_u == pytest.approx((pu.y - mu.y) / (2 * h), abs=1e-6)
            assert s.x_v == pytest.approx((pv.x - mv.x) / (2 * h), abs=1e-6)
            assert s.y_v == pytest.approx((pv.y - mv.y) / (2 * h), abs=1e-6)
            assert s.J == pytest.approx(s.x_u * s.y_v - s.x_v * s.y_u, abs=1e-14)

    def test_grid_shapes(self, curved_mesh):
        s = sample_element(curved_mesh.elements[0], curved_mesh.nodes, np.linspace(-1, 1, 3), np.linspace(-1, 1, 5))
        assert s.x.shape == (3, 5)
        assert s.J.shape == (3, 5)

    def test_invalid_edge(self):
        with pytest.raises(MeshFormatError):
            CurvedQuadElement(1, [0, 1, 2, 3]).edge_nodes(4)


class TestCurvedDomain:
    def test_layout(self, curved_mesh):
        assert len(curved_mesh.elements) == 16
        assert all(elem.order == 4 for elem in curved_mesh.elements)
        assert curved_mesh.nodes.shape == (17 * 17, 2)
        assert len(curved_mesh.boundary_edges) == 16
        assert curved_mesh.materials.eps_r.text == CURVED_EPS_R

    def test_corners(self, curved_mesh):
        np.testing.assert_allclose(curved_mesh.nodes[0], [-1.0, -1.0], atol=1e-15)
        np.testing.assert_allclose(curved_mesh.nodes[-1], [1.0, 1.0], atol=1e-15)

    def test_curved_boundaries(self, curved_mesh):
        top = curved_mesh.nodes[16 * 17:]
        np.testing.assert_allclose(top[:, 1], -0.2 * (top[:, 0] ** 2 - 1) ** 2 + 1, atol=1e-14)
        right = curved_mesh.nodes[16::17]
        np.testing.assert_allclose(right[:, 0], 0.2 * (right[:, 1] ** 2 - 1) ** 2 + 1, atol=1e-14)

    def test_positive_jacobians(self, curved_mesh):
        for e, elem in enumerate(curved_mesh.elements):
            check_orientation(elem, curved_mesh.nodes, e)

    def test_shared_edges_bit_exact(self, curved_mesh):
        t = np.linspace(-1.0, 1.0, 9)
        for (ea, ka), (eb, kb) in [((0, 1), (1, 3)), ((0, 2), (4, 0)), ((10, 1), (11, 3)), ((10, 2), (14, 0))]:
            a = _edge_points(curved_mesh, ea, ka, t)
            b = _edge_points(curved_mesh, eb, kb, t)
            np.testing.assert_array_equal(a, b)


def _edge_points(mesh, e, k, t):
    elem = mesh.elements[e]
    if k in (0, 2):
        s = sample_element(elem, mesh.nodes, t, [-1.0 if k == 0 else 1.0])
    else:
        s = sample_element(elem, mesh.nodes, [1.0 if k == 1 else -1.0], t)
    return np.stack([s.x.ravel(), s.y.ravel()])


class TestMeshFile:
    def test_dump_and_load(self, curved_mesh):
        loaded = load_mesh(dump_mesh(curved_mesh))
        np.testing.assert_array_equal(loaded.nodes, curved_mesh.nodes)
        assert [e.nodes for e in loaded.elements] == [e.nodes for e in curved_mesh.elements]
        assert loaded.boundary_edges == curved_mesh.boundary_edges
        assert loaded.materials.to_dict() == curved_mesh.materials.to_dict()

    def test_load_str(self):
        mesh = load_mesh(unit_doc())
        assert len(mesh.elements) == 1

    def test_flipped_shared_edge_loads(self, flipped_pair_mesh):
        loaded = load_mesh(dump_mesh(flipped_pair_mesh))
        assert len(loaded.elements) == 2

    def test_invalid_json(self):
        with pytest.raises(MeshFormatError):
            load_mesh(b'{"version": 1,')

    def test_wrong_version(self):
        with pytest.raises(MeshFormatError):
            load_mesh(unit_doc(version=2))

    def test_missing_field(self):
        doc = json.loads(unit_doc())
        del doc['materials']
        with pytest.raises(MeshFormatError):
            load_mesh(json.dumps(doc))

    def test_dangling_node(self):
        with pytest.raises(MeshFormatError) as excinfo:
            load_mesh(unit_doc(elements=[{'order': 1, 'nodes': [0, 1, 2, 7]}]))
        assert excinfo.value.element == 0

    def test_wrong_node_count(self):
        with pytest.raises(MeshFormatError):
            load_mesh(unit_doc(elements=[{'order': 2, 'nodes': [0, 1, 2, 3]}]))

    def test_non_integer_order(self):
        with pytest.raises(MeshFormatError):
            load_mesh(unit_doc(elements=[{'order': 1.5, 'nodes': [0, 1, 2, 3]}]))

    @pytest.mark.parametrize('changes', [
        {'boundary_edges': [['a', 1], [0, 1], [0, 2], [0, 3]]},
        {'boundary_edges': [[0, 0.5], [0, 1], [0, 2], [0, 3]]},
        {'boundary_edges': [[True, 0], [0, 1], [0, 2], [0, 3]]},
        {'boundary_edges': {'0': 0}},
        {'elements': [{'order': 1, 'nodes': '0123'}]},
        {'elements': [{'order': 1, 'nodes': 7}]},
        {'elements': [{'order': True, 'nodes': [0, 1, 2, 3]}]},
        {'elements': {'order': 1, 'nodes': [0, 1, 2, 3]}},
        {'materials': {'eps_r': 2, 'mu_r': '1'}},
    ])
    def test_wrong_field_types(self, changes):
        with pytest.raises(MeshFormatError):
            load_mesh(unit_doc(**changes))

    def test_boundary_mismatch(self):
        with pytest.raises(MeshFormatError):
            load_mesh(unit_doc(boundary_edges=[[0, 0], [0, 1], [0, 2]]))
        with pytest.raises(MeshFormatError):
            load_mesh(unit_doc(boundary_edges=[[0, 0], [0, 1], [0, 2], [0, 5]]))

    def test_inverted_element(self):
        with pytest.raises(GeometryError) as excinfo:
            load_mesh(unit_doc(elements=[{'order': 1, 'nodes': [1, 0, 3, 2]}]))
        assert excinfo.value.element == 0

    def test_bad_material_expression(self):
        with pytest.raises(ExpressionSyntaxError):
            load_mesh(unit_doc(materials={'eps_r': '2*', 'mu_r': '1'}))


class TestGenerators:
    def test_square_domain(self):
        mesh = generate_square_domain(a=4.0, b=2.0, nx=2)
        assert len(mesh.elements) == 2
        np.testing.assert_allclose(mesh.nodes.min(axis=0), [-2.0, -1.0], atol=1e-15)
        np.testing.assert_allclose(mesh.nodes.max(axis=0), [2.0, 1.0], atol=1e-15)
        assert len(mesh.boundary_edges) == 6

    def test_invalid_subdivision(self):
        with pytest.raises(MeshFormatError):
            generate_square_domain(nx=0)

    def test_random_element(self, rng):
        for _ in range(5):
            mesh = generate_random_element(rng)
            assert len(mesh.elements) == 1
            assert mesh.elements[0].order == 3
            check_orientation(mesh.elements[0], mesh.nodes, 0)
            assert float(mesh.materials.eps_r(0.0, 0.0)) > 0

    def test_scaled_eps(self):
        mats = Materials('1+x^2').scaled_eps(3.0)
        assert mats.eps_r(1.0, 0.0) == pytest.approx(6.0, abs=1e-15)

    def test_unvalidated_mesh_constructor(self):
        mesh = Mesh(UNIT_DOC['nodes'], [CurvedQuadElement(1, [0, 1, 2, 3])], [], Materials())
        with pytest.raises(MeshFormatError):
            mesh.validate()
