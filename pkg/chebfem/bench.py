"""
Cost model, fill-time benchmark and convergence sweeps.

Timings are medians of perf_counter wall times after one discarded
warm-up run. Integral counts come from the counters the backends keep,
so they are exact and machine independent.
"""
import csv
import math
import os
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import tqdm
from wcwidth import wcswidth

from chebfem import logger
from chebfem.assembly import BACKENDS, Orders, assemble_element, assemble_elements, assemble_global, assemble_system
from chebfem.common.config import SolverConfig
from chebfem.common.exceptions import ContractViolation, UsageError
from chebfem.connectivity import build_connectivity
from chebfem.eigensolve import analytic_cavity_eigenvalues, spectrum
from chebfem.mesh import Mesh, generate_square_domain
from chebfem.quadrature import sample_budget_points

# M=N -> "Predicted value" column of the reference fill-time table, as printed
REFERENCE_PREDICTED = {3: 0.6, 4: 1.0, 6: 2.4, 8: 4.25, 10: 6.7, 12: 9.6, 14: 13.0, 16: 17.0, 18: 21.6}
PREDICTED_ROUNDING_TOL = 0.07

TRACKED_EIGENVALUES = 5

OrderPair = Tuple[int, int]


def predicted_reduction(M: int, N: int) -> float:
    """Predicted fill-time reduction factor D/15, D = MN."""
    if M < 1 or N < 1:
        raise ContractViolation('predicted_reduction', 'orders must be positive, got M=%d N=%d' % (M, N))
    return M * N / 15.0


def integral_count(M: int, N: int, backend: str) -> int:
    """
    2-D integrals needed for one mass block. direct: ceil(D^2/4), the
    fourfold symmetry of the entries exploited. p2s: one kernel table of
    (2M+1)(2N+1) entries.
    """
    if M < 1 or N < 1:
        raise ContractViolation('integral_count', 'orders must be positive, got M=%d N=%d' % (M, N))
    D = M * N
    if backend == 'direct':
        return -(-D * D // 4)
    if backend == 'p2s':
        return (2 * M + 1) * (2 * N + 1)
    raise ContractViolation('integral_count', 'unknown backend %r' % backend)


def asymptotic_integral_count(M: int, N: int) -> int:
    """Large-order kernel estimate 4D."""
    return 4 * M * N


def implemented_integral_count(M: int, N: int, backend: str) -> int:
    """
    2-D integrals the backends actually perform for the E_u mass block.
    direct: unordered U-pairs times unordered T-pairs, M(M+1)/2 * (N+1)(N+2)/2,
    which tends to D^2/4 from above. p2s: the Kuu table, (2M+1)(2N+1).
    """
    if M < 1 or N < 1:
        raise ContractViolation('implemented_integral_count', 'orders must be positive, got M=%d N=%d' % (M, N))
    if backend == 'direct':
        return M * (M + 1) // 2 * ((N + 1) * (N + 2) // 2)
    if backend == 'p2s':
        return (2 * M + 1) * (2 * N + 1)
    raise ContractViolation('implemented_integral_count', 'unknown backend %r' % backend)


def instrumented_mass_counts(M: int, N: int) -> Tuple[int, int]:
    """(direct M_uu counter, p2s Kuu counter) read from one assembled element."""
    mesh = generate_square_domain()
    orders = Orders(M, N)
    direct = assemble_element(mesh, 0, orders, 2, 'direct')
    p2s = assemble_element(mesh, 0, orders, 2, 'p2s')
    return direct.counts['M_uu'], p2s.counts['Kuu']


def parse_orders(text: str) -> List[OrderPair]:
    """'4,6,8' -> [(4,4),(6,6),(8,8)]; 'MxN' items give rectangular orders."""
    result = []
    for item in text.split(','):
        item = item.strip()
        if not item:
            continue
        try:
            if 'x' in item:
                m, n = item.split('x', 1)
                result.append((int(m), int(n)))
            else:
                result.append((int(item), int(item)))
        except ValueError:
            raise UsageError('invalid order list item %r' % item)
    if not result:
        raise UsageError('empty order list')
    return result


def _median_time(func: Callable, reps: int):
    """Runs func reps+1 times, drops the first, returns (median seconds, last result)."""
    result = func()
    times = []
    for _ in range(reps):
        start = time.perf_counter()
        result = func()
        times.append(time.perf_counter() - start)
    return statistics.median(times), result


@dataclass
class BenchRow:
    M: int
    N: int
    fill_time_direct: float
    fill_time_p2s: float
    total_time_direct: float
    total_time_p2s: float
    measured_reduction: float
    predicted_reduction: float
    direct_integral_count: int
    p2s_integral_count: int


BENCH_COLUMNS = ('M', 'N', 'fill_time_direct', 'fill_time_p2s', 'total_time_direct', 'total_time_p2s',
                 'measured_reduction', 'predicted_reduction', 'direct_integral_count', 'p2s_integral_count')
BENCH_TIME_COLUMNS = ('fill_time_direct', 'fill_time_p2s', 'total_time_direct', 'total_time_p2s', 'measured_reduction')


@dataclass
class BenchReport:
    rows: List[BenchRow] = field(default_factory=list)
    quad_points: Dict[OrderPair, int] = field(default_factory=dict)

    def table(self, with_times: bool = True) -> Tuple[List[str], List[list]]:
        columns = [c for c in BENCH_COLUMNS if with_times or c not in BENCH_TIME_COLUMNS]
        return columns, [[getattr(row, c) for c in columns] for row in self.rows]

    def markdown(self) -> str:
        header = ['M=N', 'Direct fill (s)', 'P2S fill (s)', 'Direct total (s)', 'P2S total (s)',
                  'Reduction factor', 'Predicted value', 'Direct integrals', 'P2S integrals']
        body = []
        for row in self.rows:
            label = str(row.M) if row.M == row.N else '%dx%d' % (row.M, row.N)
            body.append([label, '%.4f' % row.fill_time_direct, '%.4f' % row.fill_time_p2s,
                         '%.4f' % row.total_time_direct, '%.4f' % row.total_time_p2s,
                         '%.2f' % row.measured_reduction, '%.3g' % row.predicted_reduction,
                         str(row.direct_integral_count), str(row.p2s_integral_count)])
        return markdown_table(header, body)


def bench_fill(mesh: Mesh, orders_list: Sequence[OrderPair], reps: int, config: Optional[SolverConfig] = None,
               include_solve: bool = True, quad_points: Optional[int] = None, progress: bool = False) -> BenchReport:
    """
    Element fill time of both backends for every order; the total adds
    the global scatter and, with include_solve, the eigensolve. Both
    backends sample the same tensor rule, by default the budget of about
    2MN points per integral.
    """
    if reps < 1:
        raise UsageError('reps must be at least 1, got %d' % reps)
    config = config or SolverConfig()
    report = BenchReport()
    items = tqdm.tqdm(orders_list, desc='bench', unit='order') if progress else orders_list
    for M, N in items:
        orders = Orders(M, N)
        nq = quad_points or sample_budget_points(M, N)
        report.quad_points[(M, N)] = nq
        fill = {}
        total = {}
        counts = {}
        for backend in BACKENDS:
            fill[backend], elements = _median_time(lambda: assemble_elements(mesh, orders, nq, backend), reps)
            dof_map = build_connectivity(mesh, M, N)
            scatter_time, system = _median_time(lambda: assemble_global(mesh, dof_map, elements), reps)
            counts[backend] = sum(system.counts.values()) // max(len(mesh.elements), 1)
            total[backend] = fill[backend] + scatter_time
            if include_solve:
                solve_time, _ = _median_time(lambda: spectrum(system, config.filter_tol, config.eig_method), reps)
                total[backend] += solve_time
        measured = fill['direct'] / fill['p2s'] if fill['p2s'] > 0 else math.inf
        row = BenchRow(M, N, fill['direct'], fill['p2s'], total['direct'], total['p2s'], measured,
                       predicted_reduction(M, N), counts['direct'], counts['p2s'])
        logger.debug('bench M=%d N=%d nq=%d: direct %.4fs p2s %.4fs reduction %.2f' % (M, N, nq, fill['direct'], fill['p2s'], measured))
        report.rows.append(row)
    return report


@dataclass
class ConvergenceRow:
    M: int
    N: int
    index: int
    eig_direct: float
    eig_p2s: float
    backend_rel_diff: float
    reference: float
    error_direct: float
    error_p2s: float


CONVERGENCE_COLUMNS = ('M', 'N', 'index', 'eig_direct', 'eig_p2s', 'backend_rel_diff', 'reference', 'error_direct', 'error_p2s')


@dataclass
class ConvergenceReport:
    rows: List[ConvergenceRow] = field(default_factory=list)
    reference_kind: str = ''

    def table(self) -> Tuple[List[str], List[list]]:
        return list(CONVERGENCE_COLUMNS), [[getattr(row, c) for c in CONVERGENCE_COLUMNS] for row in self.rows]

    def lowest_errors(self, backend: str = 'p2s') -> List[float]:
        """Error of the lowest tracked eigenvalue per order, in order."""
        return [getattr(row, 'error_' + backend) for row in self.rows if row.index == 0]

    def max_backend_difference(self) -> float:
        return max((row.backend_rel_diff for row in self.rows), default=0.0)


def _lowest(mesh: Mesh, M: int, N: int, backend: str, config: SolverConfig, count: int) -> np.ndarray:
    nq = config.points_for(M, N, mesh.elements[0].order)
    system = assemble_system(mesh, Orders(M, N), nq, backend)
    return spectrum(system, config.filter_tol, config.eig_method).lowest(count)


def _rel(a: float, b: float) -> float:
    if b == 0.0:
        return abs(a)
    return abs(a - b) / abs(b)


def run_convergence(mesh: Mesh, orders_list: Sequence[OrderPair], config: Optional[SolverConfig] = None,
                    reference: Optional[Sequence[float]] = None, progress: bool = False) -> ConvergenceReport:
    """
    Lowest retained eigenvalues per order from both backends. Errors are
    taken against `reference` when given, against the analytic cavity
    values on the square domain, and otherwise against a p2s run at
    config.reference_order.
    """
    config = config or SolverConfig()
    orders_list = list(orders_list)
    if any(b[0] < a[0] or b[1] < a[1] for a, b in zip(orders_list, orders_list[1:])):
        raise UsageError('convergence orders must be ascending')
    count = TRACKED_EIGENVALUES
    if reference is not None:
        kind = 'given'
    elif config.domain == 'square' and config.mesh_file is None:
        x = mesh.nodes[:, 0]
        y = mesh.nodes[:, 1]
        reference = analytic_cavity_eigenvalues(float(x.max() - x.min()), float(y.max() - y.min()), count)
        kind = 'analytic'
    else:
        ref = config.reference_order
        reference = _lowest(mesh, ref, ref, 'p2s', config, count)
        kind = 'self M=N=%d' % ref
    reference = [float(r) for r in reference]
    report = ConvergenceReport(reference_kind=kind)
    items = tqdm.tqdm(orders_list, desc='convergence', unit='order') if progress else orders_list
    for M, N in items:
        values = {backend: _lowest(mesh, M, N, backend, config, count) for backend in BACKENDS}
        tracked = min(count, len(reference), *(len(v) for v in values.values()))
        for k in range(tracked):
            d = float(values['direct'][k])
            p = float(values['p2s'][k])
            report.rows.append(ConvergenceRow(M, N, k, d, p, _rel(p, d), reference[k],
                                              _rel(d, reference[k]), _rel(p, reference[k])))
        logger.debug('convergence M=%d N=%d: lowest %.17g' % (M, N, values['p2s'][0] if tracked else float('nan')))
    return report


def _format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return '%.17g' % value
    return str(value)


def write_csv(path: str, columns: Sequence[str], rows: Sequence[Sequence]):
    """Comma separated, header row, 17 significant digits for reals."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])


def _pad(text: str, width: int) -> str:
    return text + ' ' * (width - wcswidth(text))


def markdown_table(header: Sequence[str], body: Sequence[Sequence[str]]) -> str:
    widths = [wcswidth(h) for h in header]
    for row in body:
        widths = [max(w, wcswidth(cell)) for w, cell in zip(widths, row)]
    lines = ['| ' + ' | '.join(_pad(h, w) for h, w in zip(header, widths)) + ' |',
             '|' + '|'.join('-' * (w + 2) for w in widths) + '|']
    for row in body:
        lines.append('| ' + ' | '.join(_pad(cell, w) for cell, w in zip(row, widths)) + ' |')
    return '\n'.join(lines) + '\n'


def write_markdown(path: str, text: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        f.write(text)
