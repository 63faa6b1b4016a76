import argparse
import asyncio
import os

import numpy as np
import pytest

from chebfem.common.config import SolverConfig
from chebfem.common.exceptions import UsageError
from chebfem.common.factory import ProblemFactory
from chebfem.formats.matrixfile import read_matrix
from chebfem.mesh import dump_mesh, generate_square_domain
from chebfem.session import CavitySession


def square_session(**params) -> CavitySession:
    config = SolverConfig(domain='square', **params)
    return ProblemFactory.from_config(config).get_session()


class TestSolverConfig:
    def test_defaults(self):
        config = SolverConfig()
        assert (config.backend, config.M, config.N) == ('p2s', 4, 4)
        assert config.filter_tol == 1e-8
        assert config.eig_method == 'auto'
        assert config.points_for(4, 4, 4) == 14

    def test_configured_points(self):
        assert SolverConfig(quad_points=9).points_for(12, 12, 4) == 9

    def test_from_dict(self):
        config = SolverConfig.from_dict({'orders': '4,6', 'backend': 'direct', 'threads': '2', 'mesh_file': None})
        assert (config.M, config.N, config.backend, config.threads) == (4, 6, 'direct', 2)
        assert SolverConfig.from_dict({'orders': '5'}).N == 5

    @pytest.mark.parametrize('params', [
        {'backend': 'fft'}, {'orders': '4,5,6'}, {'orders': 'a,b'}, {'threads': 'many'},
        {'color': 'red'}, {'eig_method': 'qr'}, {'domain': 'disk'}, {'orders': '0'}, {'reps': 0}, {'filter_tol': -1.0},
    ])
    def test_invalid(self, params):
        with pytest.raises(UsageError):
            SolverConfig.from_dict(params)

    def test_copies(self):
        config = SolverConfig()
        other = config.with_orders(6, 8).with_backend('direct')
        assert (config.M, config.backend) == (4, 'p2s')
        assert (other.M, other.N, other.backend) == (6, 8, 'direct')
        with pytest.raises(UsageError):
            config.with_backend('fft')

    def test_to_dict(self):
        config = SolverConfig(M=3)
        assert SolverConfig.from_dict(config.to_dict()).to_dict() == config.to_dict()
        assert 'M=3' in str(config)

    def test_from_args(self):
        args = argparse.Namespace(backend='direct', orders='6,6', quad_points=None, filter_tol=1e-8, threads=1, seed=3,
                                  eig_method='lapack', out='results', reps=2, reference_order=12, domain='square', mesh=None)
        config = SolverConfig.from_args(args)
        assert (config.backend, config.M, config.seed, config.out_dir, config.domain) == ('direct', 6, 3, 'results', 'square')


class TestProblemFactory:
    def test_default_meshes(self):
        assert len(ProblemFactory.from_config(SolverConfig(domain='square')).mesh.elements) == 1
        assert len(ProblemFactory.from_config(SolverConfig()).mesh.elements) == 16

    def test_from_mesh_file(self, tmp_path):
        path = str(tmp_path / 'mesh.json')
        with open(path, 'wb') as f:
            f.write(dump_mesh(generate_square_domain(a=4.0, b=2.0, nx=2)))
        factory = ProblemFactory.from_config(SolverConfig(mesh_file=path))
        assert len(factory.mesh.elements) == 2
        assert ProblemFactory.from_mesh_file(path).get_config().mesh_file == path

    def test_session_gets_copies(self):
        factory = ProblemFactory.from_config(SolverConfig(domain='square'))
        session = factory.get_session()
        session.config.M = 7
        assert factory.config.M == 4
        assert session.mesh is not factory.mesh


class TestCavitySession:
    def test_assemble_cached(self):
        session = square_session(M=2, N=2)

        async def run():
            first, err = await session.assemble()
            assert err is None
            second, _ = await session.assemble()
            return first, second

        first, second = asyncio.run(run())
        assert first is second
        assert first.size == 4

    def test_solve(self):
        session = square_session(M=8, N=8)
        spec, err = asyncio.run(session.solve('direct'))
        assert err is None
        np.testing.assert_allclose(spec.lowest(2), [(np.pi / 2) ** 2] * 2, rtol=1e-6)
        assert spec.nullspace_count == 49

    def test_errors_are_returned(self):
        session = square_session()
        result, err = asyncio.run(session.assemble('fft'))
        assert result is None
        assert err is not None

    def test_dump_matrices(self, tmp_path):
        session = square_session(M=3, N=3, out_dir=str(tmp_path))

        async def run():
            paths, err = await session.dump_matrices()
            assert err is None
            system, _ = await session.assemble()
            return paths, system

        paths, system = asyncio.run(run())
        assert [os.path.basename(p) for p in paths] == ['S_p2s_M3_N3.txt', 'M_p2s_M3_N3.txt']
        np.testing.assert_array_equal(read_matrix(paths[0], system.S.shape), system.S)
        np.testing.assert_array_equal(read_matrix(paths[1], system.M.shape), system.M)

    def test_threads_match_serial(self, plain_pair_mesh):
        serial = CavitySession(plain_pair_mesh, SolverConfig(M=3, N=3))
        threaded = CavitySession(plain_pair_mesh, SolverConfig(M=3, N=3, threads=3))
        a, _ = asyncio.run(serial.assemble())
        b, _ = asyncio.run(threaded.assemble())
        np.testing.assert_allclose(b.S, a.S, rtol=1e-14, atol=1e-14)
        np.testing.assert_allclose(b.M, a.M, rtol=1e-14, atol=1e-14)

    def test_concurrent_commands(self):
        session = square_session(M=3, N=3)

        async def run():
            return await asyncio.gather(session.solve(), session.solve('direct'), session.assemble())

        results = asyncio.run(run())
        assert all(err is None for _, err in results)
        assert set(key[0] for key in session.systems) == {'p2s', 'direct'}

    def test_bench_and_convergence(self):
        session = square_session(reps=1)

        async def run():
            bench, err = await session.bench([(2, 2)], include_solve=False)
            assert err is None
            conv, err = await session.convergence([(2, 2), (3, 3)])
            assert err is None
            return bench, conv

        bench, conv = asyncio.run(run())
        assert len(bench.rows) == 1
        assert conv.reference_kind == 'analytic'

    def test_set_config(self):
        session = square_session()
        session.set_config(SolverConfig(M=2, N=3))
        assert (session.orders.M, session.orders.N) == (2, 3)
        assert 'elements=1' in repr(session)

    def test_set_config_drops_cached_systems(self):
        session = square_session(M=2, N=2, quad_points=2)
        coarse, err = asyncio.run(session.assemble())
        assert err is None
        assert asyncio.run(session.assemble())[0] is coarse
        session.set_config(SolverConfig(domain='square', M=2, N=2, quad_points=20))
        assert session.systems == {}
        fine, err = asyncio.run(session.assemble())
        assert err is None
        assert fine is not coarse
        # two points per direction underintegrate the order-2 mass matrix
        assert not np.allclose(fine.M, coarse.M)
