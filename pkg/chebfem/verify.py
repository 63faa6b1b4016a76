"""
Self-checks run by the `verify` command. Each check returns
(name, ok, detail) and never raises for a failed comparison.
"""
import math
from typing import Callable, List, Tuple

import numpy as np

from chebfem import logger
from chebfem.assembly import BLOCK_NAMES, Orders, assemble_element, assemble_system
from chebfem.bench import (REFERENCE_PREDICTED, PREDICTED_ROUNDING_TOL, implemented_integral_count, instrumented_mass_counts,
                           integral_count, predicted_reduction)
from chebfem.chebyshev import PolyFamily, eval_T, eval_Tns, evaluate, evaluate_expansion, product_to_sum
from chebfem.common.config import SolverConfig
from chebfem.connectivity import discrete_gradient_count
from chebfem.eigensolve import spectrum
from chebfem.mesh import Mesh, generate_curved_domain, generate_random_element, generate_square_domain
from chebfem.quadrature import default_points

CheckResult = Tuple[str, bool, str]


def block_difference(mesh: Mesh, index: int, orders: Orders, nq: int) -> float:
    """Largest entry difference between the backends, relative to each block's largest entry."""
    direct = assemble_element(mesh, index, orders, nq, 'direct')
    p2s = assemble_element(mesh, index, orders, nq, 'p2s')
    worst = 0.0
    for name in BLOCK_NAMES:
        scale = np.max(np.abs(direct[name]))
        if scale == 0.0:
            scale = 1.0
        worst = max(worst, float(np.max(np.abs(direct[name] - p2s[name]))) / scale)
    return worst


def check_product_to_sum(max_degree: int = 20, npoints: int = 100) -> CheckResult:
    u = np.linspace(-1.0, 1.0, npoints)
    worst = 0.0
    for fa in (PolyFamily.T, PolyFamily.U):
        for fb in (PolyFamily.T, PolyFamily.U):
            for a in range(max_degree + 1):
                for b in range(max_degree + 1):
                    exact = evaluate(fa, a, u) * evaluate(fb, b, u)
                    approx = evaluate_expansion(product_to_sum(fa, a, fb, b), u)
                    scale = max(1.0, float(np.max(np.abs(exact))))
                    worst = max(worst, float(np.max(np.abs(exact - approx))) / scale)
    uc = np.linspace(-0.99, 0.99, npoints)
    recon = 0.0
    for n in range(41):
        parity = np.ones_like(uc) if n % 2 == 0 else uc
        recon = max(recon, float(np.max(np.abs(2.0 * (1.0 - uc ** 2) * eval_Tns(n, uc) + parity - eval_T(n, uc)))))
    ok = worst <= 1e-12 and recon <= 1e-10
    return 'product-to-sum exactness', ok, 'max product error %.2e, nonsingular reconstruction error %.2e' % (worst, recon)


def check_backend_equivalence(seed: int = 0, elements: int = 5, max_order: int = 4) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(elements):
        mesh = generate_random_element(rng)
        for m in range(1, max_order + 1):
            nq = default_points(m, m, mesh.elements[0].order)
            worst = max(worst, block_difference(mesh, 0, Orders(m, m), nq))
    curved = generate_curved_domain()
    for m in range(1, max_order + 1):
        nq = default_points(m, m, curved.elements[0].order)
        worst = max(worst, block_difference(curved, 5, Orders(m, m), nq))
    return 'backend equivalence', worst <= 1e-10, 'max relative block difference %.2e' % worst


def check_square_cavity(order: int = 8, config: SolverConfig = None) -> CheckResult:
    config = config or SolverConfig()
    mesh = generate_square_domain()
    nq = default_points(order, order, 1)
    system = assemble_system(mesh, Orders(order, order), nq, config.backend)
    spec = spectrum(system, config.filter_tol, config.eig_method)
    expected = (math.pi / 2.0) ** 2
    lowest = spec.lowest(2)
    err = float(np.max(np.abs(lowest - expected))) / expected if lowest.shape[0] == 2 else math.inf
    gradients = discrete_gradient_count(mesh, order, order)
    ok = err <= 1e-6 and spec.nullspace_count == gradients == (order - 1) ** 2
    return 'square cavity', ok, 'lowest pair error %.2e, nullspace %d (expected %d)' % (err, spec.nullspace_count, (order - 1) ** 2)


def check_integral_counts(orders: Tuple[int, ...] = (6, 8, 10)) -> CheckResult:
    """
    Mass-block integral counters against D/16. The modelled ratio
    ceil(D^2/4) / (2M+1)(2N+1) must be within 20%. The counters must equal
    the implemented counts and approach D/16 from above as the order grows.
    """
    details = []
    ok = True
    previous = math.inf
    for m in orders:
        direct, p2s = instrumented_mass_counts(m, m)
        exact = direct == implemented_integral_count(m, m, 'direct') and p2s == implemented_integral_count(m, m, 'p2s')
        target = m * m / 16.0
        measured = direct / p2s
        modelled = integral_count(m, m, 'direct') / integral_count(m, m, 'p2s')
        excess = measured / target - 1.0
        ok = ok and exact and abs(modelled - target) <= 0.2 * target and 0.0 <= excess < previous
        previous = excess
        details.append('M=N=%d counters %.3f (%+.0f%%), model %.3f, D/16 %.3f' % (m, measured, 100.0 * excess, modelled, target))
    return 'integral count model', ok, ', '.join(details)


def check_predicted_column() -> CheckResult:
    worst = max(abs(predicted_reduction(m, m) - printed) for m, printed in REFERENCE_PREDICTED.items())
    return 'predicted reduction column', worst <= PREDICTED_ROUNDING_TOL, 'max deviation %.3f' % worst


def run_verification(config: SolverConfig = None) -> List[CheckResult]:
    config = config or SolverConfig()
    checks: List[Callable[[], CheckResult]] = [
        check_product_to_sum,
        lambda: check_backend_equivalence(config.seed),
        lambda: check_square_cavity(config=config),
        check_integral_counts,
        check_predicted_column,
    ]
    results = []
    for check in checks:
        name, ok, detail = check()
        logger.debug('%s: %s (%s)' % (name, 'ok' if ok else 'failed', detail))
        results.append((name, ok, detail))
    return results
