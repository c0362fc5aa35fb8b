import math
import unittest

import numpy as np

from cointurn.errors import DivergentSeries, InvalidParameters, NonDivergentVariance
from cointurn.models.schedule import (
    Constant,
    CriticalCooling,
    CustomTable,
    EvenOdd,
    FactorialCounterexample,
    HarmonicHeating,
    PowerCooling,
    PowerHeating,
    UniformFootnote,
)
from cointurn.services import coefficient_cache, exact_service, simulation_service


def geometric_table(base, last=40, high=False):
    table = {n: (1.0 - base ** -n) if high else base ** -n for n in range(2, last + 1)}
    return CustomTable(table=table, tail="constant:1" if high else "constant:0")


def small_schedules():
    return [
        Constant(c=0.3),
        Constant(c=0.8),
        CriticalCooling(c=1.0),
        HarmonicHeating(c=1.0),
        PowerCooling(a=1.0, gamma=0.5),
        UniformFootnote(),
        CustomTable(table={2: 0.1, 3: 0.9, 4: 0.5, 5: 0.25}, tail="constant:0.15"),
    ]


class CorrelationTests(unittest.TestCase):
    def test_empty_product(self):
        self.assertEqual(exact_service.corr(Constant(c=0.3), 5, 5), 1.0)

    def test_constant_product(self):
        self.assertAlmostEqual(exact_service.corr(Constant(c=0.3), 1, 4), 0.064, places=15)

    def test_half_factor_vanishes(self):
        s = CustomTable(table={2: 0.1, 3: 0.5, 4: 0.2})
        self.assertEqual(exact_service.corr(s, 1, 4), 0.0)

    def test_cocycle(self):
        rng = np.random.default_rng(7)
        for s in small_schedules():
            for _ in range(20):
                i, j, k = sorted(rng.integers(1, 41, size=3))
                left = exact_service.corr(s, i, j) * exact_service.corr(s, j, k)
                self.assertAlmostEqual(left, exact_service.corr(s, i, k), delta=1e-14)

    def test_bad_indices(self):
        with self.assertRaises(InvalidParameters):
            exact_service.corr(Constant(c=0.3), 4, 2)

    def test_corr_product_record(self):
        record = exact_service.corr_product(Constant(c=0.3), 1, 3)
        self.assertEqual((record.i, record.j), (1, 3))
        self.assertAlmostEqual(record.value, 0.16)


class HeadProbabilityTests(unittest.TestCase):
    def test_conditioning_at_step_one(self):
        self.assertEqual(exact_service.head_prob(Constant(c=0.3), 1, 1), 1.0)
        self.assertEqual(exact_service.head_prob(Constant(c=0.3), 1, -1), 0.0)

    def test_symmetrised_at_step_two(self):
        s = CustomTable(table={2: 0.5, 3: 0.1})
        self.assertEqual(exact_service.head_prob(s, 3, 1), 0.5)
        self.assertEqual(exact_service.head_prob(s, 3, -1), 0.5)

    def test_two_step_table(self):
        s = CustomTable(table={2: 0.1, 3: 0.2})
        self.assertAlmostEqual(exact_service.head_prob(s, 3, 1), 0.74, places=15)

    def test_matches_enumeration(self):
        for s in small_schedules():
            for n in range(1, 17):
                for y1 in (1, -1):
                    expected = simulation_service.brute_force_dist(s, n, y1=y1).head_prob()
                    self.assertAlmostEqual(exact_service.head_prob(s, n, y1), expected, delta=1e-12)


class ErgodicityTests(unittest.TestCase):
    def test_rho_of_summable_table(self):
        result = exact_service.rho(geometric_table(4.0, last=200))
        direct = float(np.prod(1.0 - 2.0 * 4.0 ** -np.arange(2, 121, dtype=np.float64)))
        self.assertEqual(result.status, "converged")
        self.assertGreater(result.value, 0.0)
        self.assertLess(result.value, 1.0)
        self.assertAlmostEqual(result.value, direct, places=14)

    def test_rho_of_mixing_schedule_is_zero(self):
        result = exact_service.rho(Constant(c=0.3))
        self.assertEqual((result.value, result.status), (0.0, "mixing"))

    def test_rho_undefined_when_oscillating(self):
        s = EvenOdd(even_rule=geometric_table(4.0, high=True), odd_rule=geometric_table(4.0))
        self.assertEqual(exact_service.rho(s).status, "undefined")

    def test_three_cases(self):
        self.assertEqual(exact_service.ergodic_verdict(Constant(c=0.3), 100).case, "half")
        verdict = exact_service.ergodic_verdict(geometric_table(4.0), 100)
        self.assertEqual(verdict.case, "rho-limit")
        self.assertNotEqual(verdict.rho, 0.0)
        self.assertAlmostEqual(verdict.limit_plus + verdict.limit_minus, 1.0)
        oscillating = EvenOdd(even_rule=geometric_table(4.0, high=True), odd_rule=geometric_table(4.0))
        verdict = exact_service.ergodic_verdict(oscillating, 100)
        self.assertEqual(verdict.case, "no-limit")
        self.assertEqual(verdict.n_count, 50)

    def test_half_when_some_p_is_half(self):
        s = CustomTable(table={2: 0.1, 3: 0.5, 4: 0.01}, tail="constant:0")
        self.assertEqual(exact_service.ergodic_verdict(s, 50).case, "half")

    def test_distance_to_limit_within_bound(self):
        s = CustomTable(table={n: 0.3 / n**2 for n in range(2, 400)}, tail="constant:0")
        verdict = exact_service.ergodic_verdict(s, 30)
        for n in (5, 10, 30):
            gap = abs(exact_service.head_prob(s, n, 1) - verdict.limit_plus)
            self.assertLessEqual(gap, 1.01 * exact_service.tv_bound(s, n))

    def test_speed_proxy(self):
        verdict = exact_service.ergodic_verdict(Constant(c=0.3), 11)
        self.assertAlmostEqual(verdict.speed_proxy, math.exp(-2.0 * 0.3 * 10))


class CoefficientTests(unittest.TestCase):
    def setUp(self):
        coefficient_cache.clear_cache()

    def test_constant_cooling_and_heating(self):
        for c in (0.3, 0.7):
            for n in (1, 10, 1000):
                coeffs = exact_service.a_coeff(Constant(c=c), n)
                self.assertTrue(coeffs.converged)
                self.assertAlmostEqual(coeffs.a_n, 1.0 / (2.0 * c), places=8)

    def test_half_is_one(self):
        coeffs = exact_service.a_coeff(Constant(c=0.5), 7)
        self.assertEqual(coeffs.a_n, 1.0)
        self.assertEqual(coeffs.truncation_error_bound, 0.0)

    def test_heating_limit(self):
        coeffs = exact_service.a_coeff(HarmonicHeating(c=1.0), 10**4)
        self.assertLess(abs(coeffs.a_n - 0.5), 0.02)
        self.assertGreater(coeffs.a_n, 0.0)
        self.assertLessEqual(coeffs.a_n, 1.0)

    def test_cooling_is_at_least_one(self):
        for n in (4, 50, 500):
            self.assertGreaterEqual(exact_service.a_coeff(PowerCooling(a=1.0, gamma=0.5), n).a_n, 1.0)

    def test_critical_cooling_divergence_threshold(self):
        with self.assertRaises(DivergentSeries):
            exact_service.a_coeff(CriticalCooling(c=0.4), 10)
        coeffs = exact_service.a_coeff(CriticalCooling(c=0.6), 100)
        self.assertGreater(coeffs.a_n, 0.8 * 500)
        self.assertLess(coeffs.a_n, 1.2 * 500)

    def test_finitely_many_turns_diverges(self):
        s = CustomTable(table={2: 0.1, 3: 0.2}, tail="constant:0")
        with self.assertRaises(DivergentSeries):
            exact_service.a_coeff(s, 5)

    def test_opposite_parities_bound_covers_error(self):
        # factors 0.8, -0.8, 0.8, ... give sign runs of two, summed in pairs
        s = EvenOdd(even_rule=Constant(c=0.1), odd_rule=Constant(c=0.9))
        for n, exact in ((1, 45.0 / 41.0), (2, 5.0 / 41.0)):
            for tol in (1e-3, 1e-6, 1e-10):
                coeffs = exact_service.a_coeff(s, n, tol=tol)
                self.assertTrue(coeffs.converged)
                self.assertLess(coeffs.truncation_error_bound, tol)
                self.assertLessEqual(abs(coeffs.a_n - exact), coeffs.truncation_error_bound)

    def test_term_cap_logging_follows_bound(self):
        table = {n: 0.3 for n in range(2, 500)}
        table[500] = 0.9
        s = CustomTable(table=table, tail="constant:0.3")

        with self.assertLogs("cointurn.exact", level="DEBUG") as logs:
            coeffs = exact_service.a_coeff(s, 1, max_terms=100)
        self.assertFalse(coeffs.converged)
        self.assertLess(coeffs.truncation_error_bound, 1e-10)
        self.assertAlmostEqual(coeffs.a_n, 1.0 / 0.6, places=10)
        self.assertEqual({record.levelname for record in logs.records}, {"DEBUG"})

        with self.assertLogs("cointurn.exact", level="WARNING"):
            coeffs = exact_service.a_coeff(s, 1, max_terms=3)
        self.assertGreater(coeffs.truncation_error_bound, 1e-3)

    def test_bad_tolerance(self):
        with self.assertRaises(InvalidParameters):
            exact_service.a_coeff(Constant(c=0.3), 3, tol=0.0)

    def test_martingale_identity(self):
        for s in small_schedules()[:5]:
            for n in (1, 3, 40, 300):
                residual, allowed = exact_service.martingale_identity_residual(s, n)
                self.assertLessEqual(residual, allowed)


class VarianceLedgerTests(unittest.TestCase):
    def setUp(self):
        coefficient_cache.clear_cache()

    def test_constant_v_is_linear(self):
        s = Constant(c=0.3, first=0.3)
        self.assertAlmostEqual(exact_service.v_cum(s, 1000), 1000 * 7.0 / 3.0, delta=1e-6)
        self.assertEqual(exact_service.v_cum(s, 0), 0.0)

    def test_v_is_nondecreasing(self):
        for s in small_schedules()[:5]:
            v = exact_service.v_table(s, 2000).v[1:2001]
            self.assertTrue(np.all(np.diff(v) >= 0.0))

    def test_increment_identity(self):
        s = PowerCooling(a=1.0, gamma=0.5)
        table = exact_service.v_table(s, 100)
        for n in (5, 50, 99):
            p = s.prob(n + 1)
            expected = 4.0 * table.a[n + 1] ** 2 * p * (1.0 - p)
            self.assertAlmostEqual(table.v[n + 1] - table.v[n], expected, delta=1e-9 * table.v[n + 1])

    def test_harmonic_heating_log_growth(self):
        v = exact_service.v_cum(HarmonicHeating(c=1.0, first=0.0), 10**5)
        self.assertLess(abs(v / math.log(10**5) - 1.0), 0.1)

    def test_time_change_at_half(self):
        s = Constant(c=0.5)
        self.assertEqual(exact_service.time_change(s, 0.0), 1)
        self.assertEqual(exact_service.time_change(s, 3.0), 3)
        self.assertEqual(exact_service.time_change(s, 3.5), 4)
        self.assertEqual(exact_service.time_change(s, 5000.2), 5001)

    def test_time_change_is_generalised_inverse(self):
        s = PowerCooling(a=1.0, gamma=0.5)
        for x in (1.0, 17.5, 3000.0):
            z = exact_service.time_change(s, x)
            self.assertGreaterEqual(exact_service.v_cum(s, z), x)
            if z > 1:
                self.assertLess(exact_service.v_cum(s, z - 1), x)

    def test_time_change_heating_power_law(self):
        z = exact_service.time_change(PowerHeating(c=1.0, gamma=0.5), 100.0)
        self.assertTrue(0.8 <= z / 100.0**2 <= 1.25, z)

    def test_time_change_plateau(self):
        s = CustomTable(table={n: 4.0 ** -n for n in range(2, 30)}, tail="constant:0")
        with self.assertRaises(DivergentSeries):
            exact_service.time_change(s, 10.0, cap=4096)

    def test_time_change_plateau_with_bounded_coefficients(self):
        s = CustomTable(table={n: 1.0 - 4.0 ** -n for n in range(2, 30)}, tail="constant:1")
        with self.assertRaises(NonDivergentVariance):
            exact_service.time_change(s, 10.0, cap=4096)

    def test_variance_head_value(self):
        for s in small_schedules():
            self.assertEqual(exact_service.variance_exact(s, 1), 1.0)

    def test_variance_matches_double_sum(self):
        for s in small_schedules():
            for n in (2, 17, 200):
                fast = exact_service.variance_exact(s, n)
                slow = exact_service.var_double_sum(s, n)
                self.assertAlmostEqual(fast, slow, delta=1e-9 * max(1.0, slow))

    def test_variance_matches_enumeration(self):
        for s in small_schedules():
            for n in (1, 2, 9, 16):
                oracle = simulation_service.brute_force_dist(s, n).variance()
                self.assertAlmostEqual(exact_service.variance_exact(s, n), oracle, delta=1e-10)

    def test_variance_path_ends_at_exact(self):
        s = CriticalCooling(c=1.0)
        path = exact_service.variance_path(s, 50)
        self.assertEqual(len(path), 50)
        self.assertEqual(path[-1], exact_service.variance_exact(s, 50))
        self.assertTrue(np.all(path <= np.arange(1, 51) ** 2))

    def test_subcritical_variance_growth(self):
        n = 10**4
        ratio = exact_service.variance_exact(PowerCooling(a=1.0, gamma=0.5), n) / (n**1.5 / 1.5)
        self.assertTrue(0.9 <= ratio <= 1.1, ratio)

    def test_ledger_record(self):
        ledger = exact_service.variance_ledger(Constant(c=0.3), 3)
        self.assertEqual(ledger.sigma2_m, exact_service.variance_exact(Constant(c=0.3), 3))
        self.assertAlmostEqual(ledger.r_m, 0.4 + 0.16)


class MartingaleDiagnosticsTests(unittest.TestCase):
    def test_constant_ratio_vanishes(self):
        s = Constant(c=0.3, first=0.3)
        small = exact_service.martingale_diag(s, 100)
        large = exact_service.martingale_diag(s, 5 * 10**4)
        self.assertLess(large.ratio, small.ratio)
        self.assertAlmostEqual(large.gap, 1.0 - 1.0 / 0.6, places=8)
        self.assertLess(large.ratio, 1e-4)
        sigma2 = exact_service.variance_exact(s, 5 * 10**4)
        self.assertLess(abs(sigma2 / large.v_n - 1.0), 0.05)

    def test_factorial_ratio_grows(self):
        s = FactorialCounterexample()
        small = exact_service.martingale_diag(s, math.factorial(5))
        large = exact_service.martingale_diag(s, math.factorial(6))
        self.assertGreater(large.ratio, small.ratio)


if __name__ == "__main__":
    unittest.main()
