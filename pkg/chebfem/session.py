import asyncio
import os
from typing import Awaitable, Dict, List, Optional, Sequence, Tuple

from chebfem import logger
from chebfem.assembly import GlobalSystem, Orders, assemble_elements, assemble_elements_parallel, assemble_global
from chebfem.bench import BenchReport, ConvergenceReport, OrderPair, bench_fill, run_convergence
from chebfem.common.config import SolverConfig
from chebfem.connectivity import build_connectivity
from chebfem.eigensolve import Spectrum, spectrum
from chebfem.formats.matrixfile import write_matrix
from chebfem.mesh import Mesh
from chebfem.verify import CheckResult, run_verification


class CavitySession:
    """
    Async front end over one mesh and one configuration. Every public
    coroutine returns (result, error) and holds the session lock, so
    commands issued concurrently run one after the other.
    """

    def __init__(self, mesh: Mesh, config: SolverConfig):
        self.mesh = mesh
        self.config = config
        self.systems: Dict[Tuple[str, int, int, int], GlobalSystem] = {}
        self.__lock = asyncio.Lock()

    def session_lock(func):
        async def wrapper(self, *args, **kwargs):
            async with self.__lock:
                return await func(self, *args, **kwargs)
        wrapper.__doc__ = func.__doc__
        wrapper.__name__ = func.__name__
        return wrapper

    @property
    def orders(self) -> Orders:
        return Orders(self.config.M, self.config.N)

    @property
    def quad_points(self) -> int:
        return self.config.points_for(self.config.M, self.config.N, self.mesh.elements[0].order)

    async def _run_blocking(self, func, *args):
        loop = asyncio.get_running_loop()
        return await loop.run_in_executor(None, func, *args)

    async def __assemble(self, backend: str) -> GlobalSystem:
        orders = self.orders
        nq = self.quad_points
        key = (backend, orders.M, orders.N, nq)
        if key in self.systems:
            return self.systems[key]
        dof_map = build_connectivity(self.mesh, orders.M, orders.N)
        if self.config.threads > 1:
            elements = await assemble_elements_parallel(self.mesh, orders, nq, backend, self.config.threads)
        else:
            elements = await self._run_blocking(assemble_elements, self.mesh, orders, nq, backend)
        system = assemble_global(self.mesh, dof_map, elements)
        self.systems[key] = system
        logger.debug('Assembled %r with backend %s and %d quadrature points' % (system, backend, nq))
        return system

    @session_lock
    async def assemble(self, backend: Optional[str] = None) -> Awaitable[Tuple[GlobalSystem, Exception]]:
        """
        Assemble the global stiffness and mass matrices.
        Returns a tuple of (system, error).
        """
        try:
            return await self.__assemble(backend or self.config.backend), None
        except Exception as e:
            return None, e

    @session_lock
    async def solve(self, backend: Optional[str] = None) -> Awaitable[Tuple[Spectrum, Exception]]:
        """
        Solve the cavity eigenproblem, assembling first if needed.
        Returns a tuple of (spectrum, error).
        """
        try:
            system = await self.__assemble(backend or self.config.backend)
            result = await self._run_blocking(spectrum, system, self.config.filter_tol, self.config.eig_method)
            return result, None
        except Exception as e:
            return None, e

    @session_lock
    async def dump_matrices(self, out_dir: Optional[str] = None, backend: Optional[str] = None) -> Awaitable[Tuple[List[str], Exception]]:
        """
        Write the assembled S and M as `i j value` text files.
        Returns a tuple of (paths, error).
        """
        try:
            backend = backend or self.config.backend
            system = await self.__assemble(backend)
            out_dir = out_dir or self.config.out_dir
            os.makedirs(out_dir, exist_ok=True)
            paths = []
            for label, A in (('S', system.S), ('M', system.M)):
                path = os.path.join(out_dir, '%s_%s_M%d_N%d.txt' % (label, backend, self.config.M, self.config.N))
                write_matrix(path, A)
                paths.append(path)
            return paths, None
        except Exception as e:
            return None, e

    @session_lock
    async def bench(self, orders_list: Sequence[OrderPair], include_solve: bool = True,
                    progress: bool = False) -> Awaitable[Tuple[BenchReport, Exception]]:
        """
        Fill-time benchmark of both backends.
        Returns a tuple of (report, error).
        """
        try:
            report = await self._run_blocking(lambda: bench_fill(self.mesh, orders_list, self.config.reps, self.config,
                                                                 include_solve, self.config.quad_points, progress))
            return report, None
        except Exception as e:
            return None, e

    @session_lock
    async def convergence(self, orders_list: Sequence[OrderPair], reference: Optional[Sequence[float]] = None,
                          progress: bool = False) -> Awaitable[Tuple[ConvergenceReport, Exception]]:
        """
        Eigenvalue convergence of both backends over ascending orders.
        Returns a tuple of (report, error).
        """
        try:
            report = await self._run_blocking(lambda: run_convergence(self.mesh, orders_list, self.config, reference, progress))
            return report, None
        except Exception as e:
            return None, e

    @session_lock
    async def verify(self) -> Awaitable[Tuple[List[CheckResult], Exception]]:
        """
        Run the self-check suite.
        Returns a tuple of (results, error).
        """
        try:
            return await self._run_blocking(run_verification, self.config), None
        except Exception as e:
            return None, e

    def set_config(self, config: SolverConfig):
        """Replaces the configuration and drops every cached system."""
        self.config = config
        self.systems.clear()

    def __repr__(self) -> str:
        return 'CavitySession(elements=%d, config=%s)' % (len(self.mesh.elements), self.config)
