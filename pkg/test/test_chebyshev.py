import math
import threading

import numpy as np
import pytest

from chebfem.chebyshev import (PolyFamily, SumExpansion, Term, chebyshev_table, eval_T, eval_Tns, eval_U, evaluate,
                               evaluate_expansion, normalize_signed_U, product_to_sum, tns_coefficients)
from chebfem.common.exceptions import ContractViolation

T, U, TNS = PolyFamily.T, PolyFamily.U, PolyFamily.TNS


def sample_points(rng, count=100):
    return np.concatenate([[-1.0, 1.0], rng.uniform(-1.0, 1.0, count - 2)])


class TestEvaluation:
    def test_T_examples(self):
        assert eval_T(0, 0.73) == 1.0
        assert eval_T(3, 0.5) == pytest.approx(-1.0, abs=1e-15)
        assert eval_T(5, 0.3) == pytest.approx(0.99888, abs=1e-12)
        assert eval_T(5, 0.3) == pytest.approx(math.cos(5 * math.acos(0.3)), abs=1e-14)

    def test_U_examples(self):
        assert eval_U(0, -0.4) == 1.0
        assert eval_U(2, 0.5) == pytest.approx(0.0, abs=1e-15)
        assert eval_U(3, 0.2) == pytest.approx(-0.736, abs=1e-14)

    def test_Tns_examples(self):
        assert eval_Tns(2, 0.9) == pytest.approx(-1.0, abs=1e-14)
        assert eval_Tns(3, 0.4) == pytest.approx(-0.8, abs=1e-14)
        assert eval_Tns(4, 0.5) == pytest.approx(-1.0, abs=1e-14)

    def test_Tns_low_degrees_vanish(self):
        u = np.linspace(-1.0, 1.0, 11)
        np.testing.assert_array_equal(eval_Tns(0, u), 0.0)
        np.testing.assert_array_equal(eval_Tns(1, u), 0.0)

    def test_Tns_at_endpoints(self):
        # removable singularity at u = 1, Tns_n = -(U_(n-2) + U_(n-4) + ...)
        for n in range(2, 12):
            expected = -sum(eval_U(k, 1.0) for k in range(n - 2, -1, -2))
            assert eval_Tns(n, 1.0) == pytest.approx(expected, abs=1e-12)

    def test_scalar_and_array(self):
        assert isinstance(eval_T(4, 0.1), float)
        values = eval_U(4, np.array([0.1, 0.2]))
        assert values.shape == (2,)

    @pytest.mark.parametrize('func', [eval_T, eval_U, eval_Tns])
    def test_negative_degree(self, func):
        with pytest.raises(ContractViolation):
            func(-1, 0.5)

    def test_recurrence_consistency(self, rng):
        u = rng.uniform(-1.0, 1.0, 100)
        for n in range(1, 40):
            np.testing.assert_allclose(eval_T(n + 1, u), 2 * u * eval_T(n, u) - eval_T(n - 1, u), atol=1e-12)
            np.testing.assert_allclose(eval_U(n + 1, u), 2 * u * eval_U(n, u) - eval_U(n - 1, u), atol=1e-12)

    def test_T_matches_cosine(self, rng):
        u = rng.uniform(-1.0, 1.0, 50)
        for n in range(25):
            np.testing.assert_allclose(eval_T(n, u), np.cos(n * np.arccos(u)), atol=1e-12)

    def test_nonsingular_reconstruction(self, rng):
        u = rng.uniform(-0.99, 0.99, 100)
        for n in range(41):
            parity = np.ones_like(u) if n % 2 == 0 else u
            np.testing.assert_allclose(2 * (1 - u ** 2) * eval_Tns(n, u) + parity, eval_T(n, u), atol=1e-10)

    def test_Tns_difference_is_U(self, rng):
        u = sample_points(rng)
        for n in range(2, 30):
            np.testing.assert_allclose(eval_Tns(n, u) - eval_Tns(n - 2, u), -eval_U(n - 2, u), atol=1e-11)

    def test_chebyshev_table(self, rng):
        u = sample_points(rng, 20)
        for family in PolyFamily:
            table = chebyshev_table(family, 12, u)
            assert table.shape == (13, 20)
            for n in range(13):
                np.testing.assert_allclose(table[n], evaluate(family, n, u), atol=1e-12)


class TestTnsCoefficients:
    def test_known_values(self):
        np.testing.assert_array_equal(tns_coefficients(2), [-1.0])
        np.testing.assert_array_equal(tns_coefficients(3), [0.0, -2.0])

    def test_cached_read_only(self):
        coeffs = tns_coefficients(9)
        assert coeffs is tns_coefficients(9)
        with pytest.raises(ValueError):
            coeffs[0] = 1.0

    def test_concurrent_population(self):
        results = {}

        def work(k):
            results[k] = [tns_coefficients(n).copy() for n in range(60, 80)]

        threads = [threading.Thread(target=work, args=(k,)) for k in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        for k in range(1, 8):
            for a, b in zip(results[0], results[k]):
                np.testing.assert_array_equal(a, b)


class TestProductToSum:
    def test_UU_example(self):
        exp = product_to_sum(U, 1, U, 1)
        assert exp == SumExpansion([Term(1.0, TNS, 0), Term(-1.0, TNS, 4)])
        u = np.linspace(-1, 1, 9)
        np.testing.assert_allclose(evaluate_expansion(exp, u), 4 * u ** 2, atol=1e-13)

    def test_TT_example(self):
        exp = product_to_sum(T, 1, T, 1)
        assert exp == SumExpansion([Term(0.5, T, 0), Term(0.5, T, 2)])

    def test_UT_example(self):
        exp = product_to_sum(U, 2, T, 3)
        assert exp == SumExpansion([Term(0.5, U, 5)])
        assert len(exp) == 1

    def test_TU_is_swapped(self):
        assert product_to_sum(T, 3, U, 2) == product_to_sum(U, 2, T, 3)

    def test_rejects_Tns(self):
        with pytest.raises(ContractViolation):
            product_to_sum(TNS, 2, U, 1)
        with pytest.raises(ContractViolation):
            product_to_sum(T, 2, TNS, 3)

    def test_exactness_all_pairs(self, rng):
        u = sample_points(rng)
        for fa in (T, U):
            for fb in (T, U):
                for a in range(21):
                    for b in range(21):
                        exp = product_to_sum(fa, a, fb, b)
                        assert len(exp) <= 2
                        exact = evaluate(fa, a, u) * evaluate(fb, b, u)
                        scale = max(1.0, np.max(np.abs(exact)))
                        np.testing.assert_allclose(evaluate_expansion(exp, u), exact, atol=1e-12 * scale)

    def test_normalize_signed_U(self):
        assert normalize_signed_U(2) == Term(1.0, U, 2)
        assert normalize_signed_U(-1) is None
        assert normalize_signed_U(-3) == Term(-1.0, U, 1)

    def test_signed_U_matches_sine_ratio(self):
        theta = np.linspace(0.1, 3.0, 7)
        for k in range(-6, 6):
            term = normalize_signed_U(k)
            expected = np.sin((k + 1) * theta) / np.sin(theta)
            value = 0.0 if term is None else term.coeff * eval_U(term.degree, np.cos(theta))
            np.testing.assert_allclose(value, expected, atol=1e-12)


class TestSumExpansion:
    def test_merges_and_drops_zero(self):
        exp = SumExpansion([Term(0.5, U, 3), Term(0.5, U, 3), Term(1.0, T, 1), Term(-1.0, T, 1)])
        assert list(exp) == [Term(1.0, U, 3)]

    def test_scaled(self):
        exp = product_to_sum(T, 2, T, 1).scaled(4.0)
        assert exp == SumExpansion([Term(2.0, T, 1), Term(2.0, T, 3)])

    def test_str(self):
        assert str(SumExpansion()) == '0'
        assert 'U_5' in str(product_to_sum(U, 2, T, 3))
