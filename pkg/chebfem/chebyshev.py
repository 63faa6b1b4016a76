"""
Chebyshev polynomials of the first (T) and second (U) kind, the
nonsingular first-kind family Tns_n = (T_n - T_{n mod 2}) / (2(1 - u^2)),
and the product-to-sum identities that turn a product of two of them
into at most two terms.
"""
import enum
import threading
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import chebyshev as npcheb

from chebfem.common.exceptions import ContractViolation

ArrayLike = Union[float, np.ndarray]


class PolyFamily(enum.Enum):
    T = 'T'
    U = 'U'
    TNS = 'Tns'

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Term:
    coeff: float
    family: PolyFamily
    degree: int


class SumExpansion:
    """Sparse sum of (coefficient, family, degree) terms."""

    def __init__(self, terms: Iterable[Term] = ()):
        merged: Dict[Tuple[PolyFamily, int], float] = {}
        order: List[Tuple[PolyFamily, int]] = []
        for term in terms:
            key = (term.family, term.degree)
            if key not in merged:
                order.append(key)
                merged[key] = 0.0
            merged[key] += term.coeff
        self.terms: Tuple[Term, ...] = tuple(
            Term(merged[key], key[0], key[1]) for key in order if merged[key] != 0.0
        )

    def scaled(self, factor: float) -> 'SumExpansion':
        return SumExpansion(Term(t.coeff * factor, t.family, t.degree) for t in self.terms)

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __eq__(self, other):
        if not isinstance(other, SumExpansion):
            return NotImplemented
        return sorted(self.terms, key=_term_key) == sorted(other.terms, key=_term_key)

    def __str__(self):
        if len(self.terms) == 0:
            return '0'
        return ' + '.join('%+g*%s_%d' % (t.coeff, t.family, t.degree) for t in self.terms)

    def __repr__(self):
        return 'SumExpansion(%s)' % str(self)


def _term_key(term: Term):
    return (term.family.value, term.degree, term.coeff)


def _check_degree(operation: str, n: int):
    if n < 0:
        raise ContractViolation(operation, 'negative degree %d' % n)


def eval_T(n: int, u: ArrayLike) -> ArrayLike:
    _check_degree('eval_T', n)
    u = np.asarray(u, dtype=np.float64)
    prev, cur = np.ones_like(u), u.copy()
    if n == 0:
        return _scalar(prev)
    for _ in range(n - 1):
        prev, cur = cur, 2.0 * u * cur - prev
    return _scalar(cur)


def eval_U(n: int, u: ArrayLike) -> ArrayLike:
    _check_degree('eval_U', n)
    u = np.asarray(u, dtype=np.float64)
    prev, cur = np.ones_like(u), 2.0 * u
    if n == 0:
        return _scalar(prev)
    for _ in range(n - 1):
        prev, cur = cur, 2.0 * u * cur - prev
    return _scalar(cur)


_tns_cache: Dict[int, np.ndarray] = {}
_tns_lock = threading.Lock()


def tns_coefficients(n: int) -> np.ndarray:
    """
    T-basis coefficients of Tns_n, obtained by dividing T_n minus its parity
    term by 2(1 - u^2) = T_0 - T_2. The remainder is identically zero.
    """
    _check_degree('tns_coefficients', n)
    coeffs = _tns_cache.get(n)
    if coeffs is not None:
        return coeffs
    with _tns_lock:
        coeffs = _tns_cache.get(n)
        if coeffs is not None:
            return coeffs
        if n < 2:
            coeffs = np.zeros(1)
        else:
            numerator = np.zeros(n + 1)
            numerator[n] = 1.0
            numerator[n % 2] -= 1.0
            quotient, remainder = npcheb.chebdiv(numerator, np.array([1.0, 0.0, -1.0]))
            if np.any(np.abs(remainder) > 1e-12):
                raise ContractViolation('tns_coefficients', 'non-zero remainder for degree %d' % n)
            coeffs = np.round(quotient)
        coeffs.setflags(write=False)
        _tns_cache[n] = coeffs
        return coeffs


def eval_Tns(n: int, u: ArrayLike) -> ArrayLike:
    _check_degree('eval_Tns', n)
    u = np.asarray(u, dtype=np.float64)
    return _scalar(npcheb.chebval(u, tns_coefficients(n)) * np.ones_like(u))


def evaluate(family: PolyFamily, n: int, u: ArrayLike) -> ArrayLike:
    if family is PolyFamily.T:
        return eval_T(n, u)
    if family is PolyFamily.U:
        return eval_U(n, u)
    return eval_Tns(n, u)


def chebyshev_table(family: PolyFamily, nmax: int, u: ArrayLike) -> np.ndarray:
    """Values of degrees 0..nmax at the points u, shape (nmax+1, len(u))."""
    _check_degree('chebyshev_table', nmax)
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    table = np.empty((nmax + 1, u.shape[0]))
    if family is PolyFamily.TNS:
        for n in range(nmax + 1):
            table[n] = npcheb.chebval(u, tns_coefficients(n))
        return table
    table[0] = 1.0
    if nmax >= 1:
        table[1] = u if family is PolyFamily.T else 2.0 * u
    for n in range(1, nmax):
        table[n + 1] = 2.0 * u * table[n] - table[n - 1]
    return table


def normalize_signed_U(k: int) -> Optional[Term]:
    # U_k = sin((k+1)t)/sin(t) extended to negative k
    if k >= 0:
        return Term(1.0, PolyFamily.U, k)
    if k == -1:
        return None
    return Term(-1.0, PolyFamily.U, -k - 2)


def product_to_sum(fam_a: PolyFamily, a: int, fam_b: PolyFamily, b: int) -> SumExpansion:
    """
    Exact expansion of fam_a_a(u) * fam_b_b(u):

        U_a U_b = Tns_|a-b| - Tns_(a+b+2)
        T_a T_b = (T_|a-b| + T_(a+b)) / 2
        U_a T_b = (U_(a-b) + U_(a+b)) / 2
    """
    _check_degree('product_to_sum', a)
    _check_degree('product_to_sum', b)
    if fam_a is PolyFamily.TNS or fam_b is PolyFamily.TNS:
        raise ContractViolation('product_to_sum', 'Tns factors have no product-to-sum rule')
    if fam_a is PolyFamily.U and fam_b is PolyFamily.U:
        return SumExpansion([
            Term(1.0, PolyFamily.TNS, abs(a - b)),
            Term(-1.0, PolyFamily.TNS, a + b + 2),
        ])
    if fam_a is PolyFamily.T and fam_b is PolyFamily.T:
        return SumExpansion([
            Term(0.5, PolyFamily.T, abs(a - b)),
            Term(0.5, PolyFamily.T, a + b),
        ])
    if fam_a is PolyFamily.T:
        a, b = b, a
    terms = [Term(0.5, PolyFamily.U, a + b)]
    signed = normalize_signed_U(a - b)
    if signed is not None:
        terms.append(Term(0.5 * signed.coeff, signed.family, signed.degree))
    return SumExpansion(terms)


def evaluate_expansion(expansion: SumExpansion, u: ArrayLike) -> ArrayLike:
    u = np.asarray(u, dtype=np.float64)
    total = np.zeros_like(u)
    for term in expansion:
        total = total + term.coeff * np.asarray(evaluate(term.family, term.degree, u))
    return _scalar(total)


def _scalar(value: np.ndarray) -> ArrayLike:
    if np.ndim(value) == 0:
        return float(value)
    return value
