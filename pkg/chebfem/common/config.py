import copy
from typing import Any, Callable, Dict, Optional

from chebfem.assembly import BACKENDS
from chebfem.common.exceptions import UsageError
from chebfem.eigensolve import EIG_METHODS
from chebfem.quadrature import default_points

DOMAINS = ('curved', 'square')


def _orders(value: str):
    parts = [p.strip() for p in str(value).split(',') if p.strip()]
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise UsageError('orders must be M,N or a single order, got %r' % value)
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise UsageError('orders must be integers, got %r' % value)


solver_config_params: Dict[str, Callable[[Any], Any]] = {
    'backend': str,
    'M': int,
    'N': int,
    'quad_points': int,
    'filter_tol': float,
    'threads': int,
    'seed': int,
    'eig_method': str,
    'out_dir': str,
    'reps': int,
    'reference_order': int,
    'domain': str,
    'mesh_file': str,
}


class SolverConfig:
    def __init__(self, backend: str = 'p2s', M: int = 4, N: int = 4, quad_points: Optional[int] = None,
                 filter_tol: float = 1e-8, threads: int = 1, seed: int = 0, eig_method: str = 'auto',
                 out_dir: str = '.', reps: int = 3, reference_order: int = 18, domain: str = 'curved',
                 mesh_file: Optional[str] = None):
        self.backend: str = backend
        self.M: int = M
        self.N: int = N
        self.quad_points: Optional[int] = quad_points
        self.filter_tol: float = filter_tol
        self.threads: int = threads
        self.seed: int = seed
        self.eig_method: str = eig_method
        self.out_dir: str = out_dir
        self.reps: int = reps
        self.reference_order: int = reference_order
        self.domain: str = domain
        self.mesh_file: Optional[str] = mesh_file
        self.validate()

    def validate(self):
        if self.backend not in BACKENDS:
            raise UsageError('backend must be one of %s, got %r' % (','.join(BACKENDS), self.backend))
        if self.eig_method not in EIG_METHODS:
            raise UsageError('eig method must be one of %s, got %r' % (','.join(EIG_METHODS), self.eig_method))
        if self.domain not in DOMAINS:
            raise UsageError('domain must be one of %s, got %r' % (','.join(DOMAINS), self.domain))
        if self.M < 1 or self.N < 1:
            raise UsageError('orders must be positive, got M=%d N=%d' % (self.M, self.N))
        if self.quad_points is not None and self.quad_points < 1:
            raise UsageError('quad points must be positive')
        if self.threads < 1:
            raise UsageError('threads must be at least 1')
        if self.reps < 1:
            raise UsageError('reps must be at least 1')
        if not self.filter_tol > 0:
            raise UsageError('filter tolerance must be positive')
        return self

    def with_orders(self, M: int, N: int) -> 'SolverConfig':
        config = copy.deepcopy(self)
        config.M = M
        config.N = N
        return config.validate()

    def with_backend(self, backend: str) -> 'SolverConfig':
        config = copy.deepcopy(self)
        config.backend = backend
        return config.validate()

    def points_for(self, M: int, N: int, p: int) -> int:
        """Quadrature points per direction: the configured count or the default budget."""
        if self.quad_points is not None:
            return self.quad_points
        return default_points(M, N, p)

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in solver_config_params}

    @staticmethod
    def from_dict(params: Dict[str, Any]) -> 'SolverConfig':
        kwargs = {}
        for name, value in params.items():
            if value is None:
                continue
            if name == 'orders':
                kwargs['M'], kwargs['N'] = _orders(value)
                continue
            if name not in solver_config_params:
                raise UsageError('unknown configuration parameter %r' % name)
            try:
                kwargs[name] = solver_config_params[name](value)
            except (TypeError, ValueError):
                raise UsageError('invalid value %r for %s' % (value, name))
        return SolverConfig(**kwargs)

    @staticmethod
    def from_args(args) -> 'SolverConfig':
        params = {
            'backend': args.backend,
            'orders': args.orders,
            'quad_points': args.quad_points,
            'filter_tol': args.filter_tol,
            'threads': args.threads,
            'seed': args.seed,
            'eig_method': args.eig_method,
            'out_dir': args.out,
            'reps': args.reps,
            'reference_order': args.reference_order,
            'domain': args.domain,
            'mesh_file': args.mesh,
        }
        return SolverConfig.from_dict(params)

    def __str__(self):
        return 'SolverConfig(%s)' % ', '.join('%s=%r' % kv for kv in self.to_dict().items())
