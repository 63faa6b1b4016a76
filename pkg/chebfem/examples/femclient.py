import asyncio
import os
import shlex
import sys
from typing import List

from colorama import Fore, Style, init as colorama_init

from chebfem import logger
from chebfem._version import __banner__
from chebfem.bench import markdown_table, parse_orders, write_csv, write_markdown
from chebfem.common.exceptions import UsageError, VerificationFailure
from chebfem.common.factory import ProblemFactory
from chebfem.common.shell import CommandShell, ExitPromptException
from chebfem.mesh import dump_mesh
from chebfem.session import CavitySession

# python3 -m chebfem.examples.femclient --orders 6,6 --backend p2s mesh-gen assemble solve
# python3 -m chebfem.examples.femclient --domain square verify

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VERIFICATION = 2


class FEMClient(CommandShell):
    def __init__(self, factory: ProblemFactory, silent: bool = False):
        CommandShell.__init__(self)
        self.factory = factory
        self.session: CavitySession = factory.get_session()
        self.silent = silent
        self.aliases.update({
            'mesh-gen': 'meshgen',
            'eig': 'solve',
        })

    @property
    def config(self):
        return self.session.config

    async def handle_error(self, err: Exception):
        print(err)
        return None, err

    async def print(self, *args, **kwargs):
        if self.silent is False:
            print(*args, **kwargs)

    def _out(self, name: str) -> str:
        os.makedirs(self.config.out_dir, exist_ok=True)
        return os.path.join(self.config.out_dir, name)

    async def do_meshgen(self, path: str = None):
        """Write the active mesh as JSON"""
        try:
            path = path or self._out('mesh.json')
            with open(path, 'wb') as f:
                f.write(dump_mesh(self.session.mesh))
            await self.print('Mesh with %d elements written to %s' % (len(self.session.mesh.elements), path))
            return path, None
        except Exception as e:
            return await self.handle_error(e)

    async def do_assemble(self, backend: str = None):
        """Assemble S and M and dump them as text matrices"""
        try:
            system, err = await self.session.assemble(backend)
            if err is not None:
                raise err
            paths, err = await self.session.dump_matrices(backend=backend)
            if err is not None:
                raise err
            await self.print('Assembled %d free DOFs (%s), matrices in %s' % (system.size, backend or self.config.backend, ', '.join(paths)))
            return system, None
        except Exception as e:
            return await self.handle_error(e)

    async def do_solve(self, count: str = '10', backend: str = None):
        """Solve the cavity eigenproblem and print the lowest eigenvalues"""
        try:
            spec, err = await self.session.solve(backend)
            if err is not None:
                raise err
            shown = spec.lowest(int(count))
            backend = backend or self.config.backend
            path = self._out('eigenvalues_%s_M%d_N%d.csv' % (backend, self.config.M, self.config.N))
            write_csv(path, ['index', 'k0_squared'], [[i, float(v)] for i, v in enumerate(spec.eigenvalues)])
            await self.print('Nullspace count: %d (filter_tol %g, %s)' % (spec.nullspace_count, spec.filter_tol, spec.method))
            for i, value in enumerate(shown):
                await self.print('%3d  %.17g' % (i, value))
            logger.info('Solved %d retained eigenvalues, written to %s' % (spec.eigenvalues.shape[0], path))
            return spec, None
        except Exception as e:
            return await self.handle_error(e)

    async def do_bench(self, orders: str = '4,6,8,10,12', solve: str = 'yes'):
        """Fill-time benchmark of both backends, CSV and Markdown report"""
        try:
            report, err = await self.session.bench(parse_orders(orders), solve.lower() in ('yes', 'y', '1', 'true'), progress=not self.silent)
            if err is not None:
                raise err
            columns, rows = report.table()
            write_csv(self._out('bench.csv'), columns, rows)
            columns, rows = report.table(with_times=False)
            write_csv(self._out('bench_counts.csv'), columns, rows)
            text = report.markdown()
            write_markdown(self._out('bench.md'), text)
            await self.print(text)
            return report, None
        except Exception as e:
            return await self.handle_error(e)

    async def do_convergence(self, orders: str = '2,4,6,8'):
        """Lowest eigenvalue errors of both backends over ascending orders"""
        try:
            report, err = await self.session.convergence(parse_orders(orders), progress=not self.silent)
            if err is not None:
                raise err
            columns, rows = report.table()
            write_csv(self._out('convergence.csv'), columns, rows)
            body = [[str(r.M), str(r.index), '%.12g' % r.eig_p2s, '%.2e' % r.backend_rel_diff, '%.2e' % r.error_p2s] for r in report.rows]
            await self.print('Reference: %s' % report.reference_kind)
            await self.print(markdown_table(['M', 'k', 'eigenvalue', 'backend diff', 'error'], body))
            return report, None
        except Exception as e:
            return await self.handle_error(e)

    async def do_verify(self):
        """Run the self-check suite"""
        try:
            results, err = await self.session.verify()
            if err is not None:
                raise err
            failed = []
            for name, ok, detail in results:
                mark = Fore.GREEN + 'PASS' if ok else Fore.RED + 'FAIL'
                await self.print('%s%s %s: %s' % (mark, Style.RESET_ALL, name, detail))
                if not ok:
                    failed.append(name)
            if failed:
                return results, VerificationFailure(failed)
            return results, None
        except Exception as e:
            return await self.handle_error(e)


def exit_code(err: Exception) -> int:
    if err is None:
        return EXIT_OK
    if isinstance(err, VerificationFailure):
        return EXIT_VERIFICATION
    return EXIT_FAILURE


async def amain(factory: ProblemFactory, silent: bool = False, commands: List[str] = None,
                no_interactive: bool = False, continue_on_error: bool = False) -> int:
    client = FEMClient(factory, silent)
    commands = commands or []
    if len(commands) == 0:
        if no_interactive is True:
            print('Not starting interactive!')
            return EXIT_FAILURE
        await client.run()
        return EXIT_OK
    code = EXIT_OK
    for command in commands:
        if command == 'i':
            await client.run()
            return code
        cmd = shlex.split(command)
        if silent is False:
            print('>>> %s' % command)
        try:
            _, err = await client.run_command(cmd[0], cmd[1:])
        except ExitPromptException:
            return code
        if err is not None:
            code = EXIT_VERIFICATION if code == EXIT_VERIFICATION else exit_code(err)
            if continue_on_error is False:
                print('Batch execution stopped early, because a command failed!')
                return exit_code(err)
    return code


def main():
    import argparse
    import logging

    parser = argparse.ArgumentParser(description='Hierarchical Chebyshev FEM cavity solver')
    parser.add_argument('-v', '--verbose', action='count', default=0)
    parser.add_argument('-s', '--silent', action='store_true', help='do not print banner')
    parser.add_argument('-n', '--no-interactive', action='store_true')
    parser.add_argument('-c', '--continue-on-error', action='store_true', help='When in batch execution mode, execute all commands even if one fails')
    parser.add_argument('--backend', default='p2s', help='direct or p2s')
    parser.add_argument('--orders', default='4,4', help='M,N expansion orders')
    parser.add_argument('--quad-points', type=int, help='Gauss points per direction, default max(M,N)+p+6')
    parser.add_argument('--mesh', help='mesh JSON file, overrides --domain')
    parser.add_argument('--domain', default='curved', help='curved (inhomogeneous curved cavity) or square')
    parser.add_argument('--out', default='.', help='output directory')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--filter-tol', type=float, default=1e-8)
    parser.add_argument('--threads', type=int, default=1)
    parser.add_argument('--eig-method', default='auto', help='auto, jacobi or lapack')
    parser.add_argument('--reps', type=int, default=3, help='timing repetitions')
    parser.add_argument('--reference-order', type=int, default=18, help='self-reference order for convergence')
    parser.add_argument('commands', nargs='*')

    args = parser.parse_args()
    if args.silent is False:
        print(__banner__)
    if args.verbose > 0:
        logger.setLevel(logging.DEBUG)
    colorama_init()

    try:
        factory = ProblemFactory.from_args(args)
    except UsageError as e:
        print(e)
        sys.exit(EXIT_FAILURE)
    except Exception as e:
        print('Failed to set up the problem: %s' % e)
        sys.exit(EXIT_FAILURE)

    sys.exit(asyncio.run(amain(factory, args.silent, args.commands, args.no_interactive, args.continue_on_error)))


if __name__ == '__main__':
    main()
