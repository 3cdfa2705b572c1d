import unittest

import numpy as np

from slime.errors import DimensionMismatch, EmptyExplained, EmptyGold, ZeroVariance
from slime.metrics import FidelityReport, coverage, gold_segments, r2_score, recall_precision
from slime.seeding import make_rng
from slime.surrogate_core import LinearSurrogate, NeighborhoodSample, fit_weighted_least_squares


class R2Tests(unittest.TestCase):
    def setUp(self):
        rng = make_rng(17)
        self.points = rng.standard_normal((30, 2))
        self.weights = rng.uniform(0.2, 3.0, size=30)
        self.labels = rng.standard_normal(30)
        self.sample = NeighborhoodSample(points=self.points, weights=self.weights, labels=self.labels)

    def test_exact_interpolation_scores_one(self):
        labels = 0.5 + self.points @ np.array([1.0, -2.0])
        sample = NeighborhoodSample(points=self.points, weights=self.weights, labels=labels)
        self.assertAlmostEqual(r2_score(fit_weighted_least_squares(sample), sample), 1.0, delta=1e-12)

    def test_weighted_mean_scores_zero(self):
        mean = float(np.sum(self.weights * self.labels) / np.sum(self.weights))
        surrogate = LinearSurrogate.constant(mean, 2)
        self.assertAlmostEqual(r2_score(surrogate, self.sample), 0.0, delta=1e-12)

    def test_worse_than_mean_is_negative(self):
        surrogate = LinearSurrogate.constant(float(self.labels.mean() + 10.0 * self.labels.std()), 2)
        self.assertLess(r2_score(surrogate, self.sample), 0.0)

    def test_matches_formula_and_ignores_weight_scale(self):
        surrogate = fit_weighted_least_squares(self.sample)
        residual = self.labels - (surrogate.intercept + self.points @ surrogate.coefficients)
        mean = np.sum(self.weights * self.labels) / np.sum(self.weights)
        expected = 1.0 - np.sum(self.weights * residual**2) / np.sum(self.weights * (self.labels - mean) ** 2)

        self.assertAlmostEqual(r2_score(surrogate, self.sample), float(expected), delta=1e-12)
        scaled = NeighborhoodSample(points=self.points, weights=1e-30 * self.weights, labels=self.labels)
        self.assertAlmostEqual(r2_score(surrogate, scaled), float(expected), delta=1e-12)

    def test_constant_labels(self):
        sample = NeighborhoodSample(points=self.points, weights=self.weights, labels=np.full(30, 0.7))
        self.assertEqual(r2_score(LinearSurrogate.constant(0.7, 2), sample), 1.0)
        with self.assertRaises(ZeroVariance):
            r2_score(LinearSurrogate.constant(0.2, 2), sample)

    def test_zero_weight_points_do_not_count(self):
        labels = np.r_[np.full(29, 0.3), 5.0]
        weights = np.r_[np.ones(29), 0.0]
        sample = NeighborhoodSample(points=self.points, weights=weights, labels=labels)
        self.assertEqual(r2_score(LinearSurrogate.constant(0.3, 2), sample), 1.0)

    def test_needs_two_points(self):
        sample = NeighborhoodSample.unweighted(np.zeros((1, 2)), np.zeros(1))
        with self.assertRaises(DimensionMismatch):
            r2_score(LinearSurrogate.constant(0.0, 2), sample)


class FeatureAgreementTests(unittest.TestCase):
    def test_recall_precision_examples(self):
        self.assertEqual(recall_precision({1, 2}, {1, 2}), (1.0, 1.0))
        self.assertEqual(recall_precision({1, 2, 3, 4}, {1, 2, 5, 6}), (0.5, 0.5))
        self.assertEqual(recall_precision({1}, {2}), (0.0, 0.0))
        self.assertEqual(recall_precision({0, 1, 2}, {1, 2, 5, 6}), (2 / 3, 0.5))

    def test_empty_sets(self):
        with self.assertRaises(EmptyGold):
            recall_precision(set(), {1})
        with self.assertRaises(EmptyExplained):
            recall_precision({1}, set())

    def test_coverage(self):
        segmentation = np.array([0, 0, 1, 1, 2, 2])
        gold = gold_segments({1, 4}, segmentation)

        self.assertEqual(gold, frozenset({0, 2}))
        self.assertEqual(coverage(gold, {0, 1}), 0.5)
        self.assertEqual(coverage(gold, {2, 0}), 1.0)
        self.assertEqual(coverage(gold, set()), 0.0)
        with self.assertRaises(EmptyGold):
            coverage(set(), {0})

    def test_report_serialises(self):
        report = FidelityReport(r2=0.9, recall=1.0, precision=0.5)
        self.assertEqual(report.to_dict(), {"r2": 0.9, "recall": 1.0, "precision": 0.5, "coverage": None})


if __name__ == "__main__":
    unittest.main()
