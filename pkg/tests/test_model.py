import math
import sys
import unittest
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from ouweekly.errors import ModelError, ParameterError
from ouweekly.model import (PIP, OUParams, StoppedMaxProblem, cumulative_hazard, expected_weekly_return,
                            hazard, integrate, integrate_log, kappa_for_pc_probability, mirror_short,
                            pc_probability, pdf_mass, psi, return_distribution, running_max_cdf,
                            running_max_pdf, short_pc_probability, support_upper)

START = 1.3
DRAWDOWN = 0.005


def problem(theta: float, kappa: float, start: float = START, drawdown: float = DRAWDOWN) -> StoppedMaxProblem:
    return StoppedMaxProblem(start=start, drawdown=drawdown, ou=OUParams.from_kappa(theta, kappa))


class QuadratureTests(unittest.TestCase):
    def test_polynomial_is_exact(self) -> None:
        result = integrate(lambda nodes, rows: nodes ** 3, [0.0, 1.0], [1.0, 3.0], 1e-12)
        np.testing.assert_allclose(result, [0.25, 20.0], rtol=1e-12)

    def test_rows_select_interval_parameters(self) -> None:
        scale = np.array([1.0, 2.0, 5.0])
        result = integrate(lambda nodes, rows: scale[rows][:, None] * np.cos(nodes), np.zeros(3), math.pi / 2, 1e-12)
        np.testing.assert_allclose(result, scale, rtol=1e-10)

    def test_log_space_survives_huge_exponents(self) -> None:
        # log of int_0^1 exp(2000 y) dy
        result = integrate_log(lambda nodes, rows: 2000.0 * nodes, [0.0], [1.0], 1e-10)
        expected = 2000.0 - math.log(2000.0) + math.log1p(-math.exp(-2000.0))
        self.assertAlmostEqual(result[0], expected, places=8)

    def test_empty_input(self) -> None:
        self.assertEqual(integrate(lambda nodes, rows: nodes, [], [], 1e-8).size, 0)


class ParamsTests(unittest.TestCase):
    def test_kappa_round_trip(self) -> None:
        ou = OUParams.from_kappa(1.3, 965.0, sigma=0.02)
        self.assertAlmostEqual(ou.kappa, 965.0)
        self.assertAlmostEqual(ou.lam, 965.0 * 0.0004)

    def test_invalid_values(self) -> None:
        with self.assertRaises(ParameterError):
            OUParams(1.3, 1.0, 0.0)
        with self.assertRaises(ParameterError):
            OUParams(math.nan, 1.0, 0.01)
        with self.assertRaises(ParameterError):
            StoppedMaxProblem(1.3, 0.0, OUParams(1.3, 1.0, 0.01))

    def test_non_reverting_model_is_not_usable(self) -> None:
        self.assertFalse(OUParams(1.3, 0.0, 0.01).usable)
        self.assertFalse(OUParams(1.3, -0.5, 0.01).usable)
        self.assertTrue(OUParams(1.3, 0.5, 0.01).usable)


class BrownianLimitTests(unittest.TestCase):
    """With kappa = 0 the stopped maximum is exponential with mean equal to the drawdown."""

    def setUp(self) -> None:
        self.prob = problem(theta=1.3, kappa=0.0)

    def test_hazard_is_constant(self) -> None:
        np.testing.assert_allclose(hazard(np.array([1.3, 1.31, 1.4]), self.prob), 1 / DRAWDOWN, rtol=1e-10)

    def test_cdf_matches_exponential_law(self) -> None:
        v = START + np.array([0.0005, 0.003, 0.005, 0.012, 0.03])
        expected = 1.0 - np.exp(-(v - START) / DRAWDOWN)
        np.testing.assert_allclose(running_max_cdf(v, self.prob), expected, atol=1e-7)

    def test_pdf_matches_exponential_density(self) -> None:
        v = START + np.array([0.0, 0.002, 0.01])
        expected = np.exp(-(v - START) / DRAWDOWN) / DRAWDOWN
        np.testing.assert_allclose(running_max_pdf(v, self.prob), expected, rtol=1e-7)

    def test_expected_return_is_zero_when_pc_equals_ts(self) -> None:
        self.assertAlmostEqual(expected_weekly_return(self.prob, 50, 50), 0.0, places=6)

    def test_pc_probability(self) -> None:
        self.assertAlmostEqual(pc_probability(self.prob, 0.0055), math.exp(-1.1), places=7)


class RunningMaxLawTests(unittest.TestCase):
    def setUp(self) -> None:
        self.prob = problem(theta=1.335, kappa=965.0)

    def test_cdf_is_monotone_and_bounded(self) -> None:
        v = START + np.linspace(0.0, 0.03, 25)
        cdf = running_max_cdf(v, self.prob)
        self.assertEqual(cdf[0], 0.0)
        self.assertTrue(np.all(np.diff(cdf) >= 0))
        self.assertTrue(np.all((cdf >= 0) & (cdf <= 1)))

    def test_below_start(self) -> None:
        self.assertEqual(running_max_cdf(1.29, self.prob), 0.0)
        self.assertEqual(running_max_pdf(1.29, self.prob), 0.0)
        self.assertEqual(cumulative_hazard(1.29, self.prob), 0.0)

    def test_cumulative_hazard_is_order_free(self) -> None:
        v = np.array([1.31, 1.302, 1.306])
        np.testing.assert_allclose(cumulative_hazard(v, self.prob),
                                   [cumulative_hazard(x, self.prob) for x in v], rtol=1e-8)

    def test_density_integrates_to_one(self) -> None:
        self.assertAlmostEqual(pdf_mass(self.prob), 1.0, places=6)
        self.assertGreater(support_upper(self.prob), START)

    def test_mixed_law_is_normalised(self) -> None:
        for theta, kappa, pc in ((1.335, 965.0, 0.005), (1.25, 965.0, 0.0055), (1.3, 300.0, 0.004),
                                 (1.31, 4000.0, 0.006)):
            prob = problem(theta, kappa)
            continuous = integrate(lambda nodes, rows: running_max_pdf(nodes, prob), [START], [START + pc], 1e-10)
            with self.subTest(theta=theta, kappa=kappa):
                self.assertAlmostEqual(float(continuous[0]) + pc_probability(prob, pc), 1.0, delta=1e-6)

    def test_psi_overflow_raises(self) -> None:
        with self.assertRaises(FloatingPointError):
            psi(0.0, 10.0, OUParams.from_kappa(0.0, 1e4))

    def test_return_distribution_mass(self) -> None:
        dist = return_distribution(self.prob, 50, 50)
        self.assertAlmostEqual(dist.mass(), 1.0, delta=1e-6)
        self.assertEqual(dist.grid[0], -50.0)
        self.assertEqual(dist.grid[-1], 0.0)
        self.assertAlmostEqual(dist.pc_atom, pc_probability(self.prob, 50 * PIP), places=12)
        self.assertAlmostEqual(float(dist.cdf(60.0)), dist.mass(), places=12)

    def test_coarse_grid_is_refined(self) -> None:
        dist = return_distribution(self.prob, 50, 50, grid_size=64)
        self.assertAlmostEqual(dist.mass(), 1.0, delta=1e-6)
        self.assertGreater(dist.grid.size, 64)
        self.assertEqual((dist.grid.size - 1) % 63, 0)

    def test_mass_over_random_parameters(self) -> None:
        rng = np.random.default_rng(2024)
        for _ in range(20):
            theta = float(rng.uniform(1.28, 1.34))
            kappa = float(rng.uniform(200.0, 3000.0))
            ts = int(rng.integers(40, 61))
            pc = ts + int(rng.integers(0, 16))
            prob = problem(theta, kappa, drawdown=ts * PIP)
            dist = return_distribution(prob, ts, pc, grid_size=128)
            with self.subTest(theta=theta, kappa=kappa, ts=ts, pc=pc):
                self.assertAlmostEqual(dist.mass(), 1.0, delta=1e-6)
                self.assertEqual(dist.grid[0], -ts)

    def test_threshold_mismatch(self) -> None:
        with self.assertRaises(ModelError):
            expected_weekly_return(self.prob, 40, 50)
        with self.assertRaises(ParameterError):
            return_distribution(self.prob, 50, 50, grid_size=10)


class ProfitCallTableTests(unittest.TestCase):
    """One calibrated ratio reproduces the remaining profit-call probabilities."""

    @classmethod
    def setUpClass(cls) -> None:
        cls.kappa = kappa_for_pc_probability(0.43, START, 1.335, DRAWDOWN, 0.005)

    def test_calibrated_ratio(self) -> None:
        self.assertGreater(self.kappa, 900.0)
        self.assertLess(self.kappa, 1030.0)
        self.assertAlmostEqual(pc_probability(problem(1.335, self.kappa), 0.005), 0.43, places=8)

    def test_pc_probabilities(self) -> None:
        for theta, expected in ((1.295, 0.36), (1.285, 0.34), (1.275, 0.32), (1.25, 0.28)):
            with self.subTest(theta=theta):
                self.assertAlmostEqual(pc_probability(problem(theta, self.kappa), 0.005), expected, delta=0.015)

    def test_pc_probability_increases_with_theta(self) -> None:
        thetas = (1.25, 1.275, 1.285, 1.295, 1.335)
        probs = [pc_probability(problem(t, self.kappa), 0.005) for t in thetas]
        self.assertEqual(probs, sorted(probs))

    def test_expected_return_order_and_signs(self) -> None:
        thetas = (1.25, 1.275, 1.285, 1.295, 1.335)
        for pc_pips in (50, 55):
            values = [expected_weekly_return(problem(t, self.kappa), 50, pc_pips) for t in thetas]
            with self.subTest(pc=pc_pips):
                self.assertEqual(values, sorted(values))
                self.assertGreater(values[-1], 0.0)
                self.assertLess(values[0], 0.0)

    def test_expected_return_signs_with_wider_profit_call(self) -> None:
        # positive only where the mean lies above the opening level
        for theta, positive in ((1.25, False), (1.275, False), (1.285, False), (1.295, False), (1.335, True)):
            value = expected_weekly_return(problem(theta, self.kappa), 50, 55)
            with self.subTest(theta=theta):
                if positive:
                    self.assertGreater(value, 0.0)
                else:
                    self.assertLess(value, 0.0)

    def test_expected_return_wider_profit_call(self) -> None:
        value = expected_weekly_return(problem(1.335, self.kappa), 50, 55)
        self.assertGreater(value, 4.9)
        self.assertLess(value, 6.3)

    def test_unreachable_target(self) -> None:
        with self.assertRaises(ModelError):
            kappa_for_pc_probability(0.01, START, 1.335, DRAWDOWN, 0.005)


class ShortSideTests(unittest.TestCase):
    def test_reflection_about_the_mean(self) -> None:
        ou = OUParams.from_kappa(1.3, 800.0)
        short = StoppedMaxProblem(1.3 + 0.01, DRAWDOWN, ou)
        long = StoppedMaxProblem(1.3 - 0.01, DRAWDOWN, ou)
        self.assertAlmostEqual(short_pc_probability(short, 0.005), pc_probability(long, 0.005), places=7)

    def test_mirror_twice_is_identity(self) -> None:
        prob = problem(1.335, 965.0)
        self.assertEqual(mirror_short(mirror_short(prob)), prob)


if __name__ == "__main__":
    unittest.main()
