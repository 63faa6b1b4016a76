import copy

from chebfem.common.config import SolverConfig
from chebfem.mesh import Mesh, generate_curved_domain, generate_square_domain, load_mesh


class ProblemFactory:
    def __init__(self, mesh: Mesh, config: SolverConfig):
        self.mesh = mesh
        self.config = config

    def get_mesh(self) -> Mesh:
        return copy.deepcopy(self.mesh)

    def get_config(self) -> SolverConfig:
        return copy.deepcopy(self.config)

    def get_session(self):
        from chebfem.session import CavitySession
        return CavitySession(self.get_mesh(), self.get_config())

    def with_config(self, config: SolverConfig) -> 'ProblemFactory':
        return ProblemFactory(self.mesh, config)

    @staticmethod
    def default_mesh(config: SolverConfig) -> Mesh:
        if config.domain == 'square':
            return generate_square_domain()
        return generate_curved_domain()

    @staticmethod
    def from_config(config: SolverConfig) -> 'ProblemFactory':
        if config.mesh_file is not None:
            return ProblemFactory.from_mesh_file(config.mesh_file, config)
        return ProblemFactory(ProblemFactory.default_mesh(config), config)

    @staticmethod
    def from_mesh_file(path: str, config: SolverConfig = None) -> 'ProblemFactory':
        with open(path, 'rb') as f:
            mesh = load_mesh(f.read())
        config = config or SolverConfig(mesh_file=path)
        return ProblemFactory(mesh, config)

    @staticmethod
    def from_args(args) -> 'ProblemFactory':
        return ProblemFactory.from_config(SolverConfig.from_args(args))
