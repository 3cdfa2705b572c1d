import shutil
import tempfile
import unittest
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from slime.errors import (
    ConfigError,
    DatasetError,
    DimensionMismatch,
    EmptyWeights,
    InvalidSigma,
    MissingSegmentation,
)
from slime.neighborhoods import (
    ConversionKind,
    ConversionSpec,
    KernelSpec,
    SamplerKind,
    SamplerSpec,
    convert,
    convert_batch,
    effective_sample_size,
    fixed_length_segmentation,
    kernel_weight,
    kernel_weights,
    load_segmentation_csv,
    sample_binary_neighborhood,
    sample_gaussian_offsets,
    sample_neighborhood,
    sample_uniform_cube,
    save_segmentation_csv,
)
from slime.seeding import make_rng


def _spec(kind, sigma=0.5, n=100, seed=0):
    return SamplerSpec(kind=kind, sigma=sigma, n=n, seed=seed)


class BinarySamplerTests(unittest.TestCase):
    def test_single_row_is_target(self):
        points = sample_binary_neighborhood(3, _spec(SamplerKind.BINARY_TOGGLE, n=1))
        assert_array_equal(points, np.ones((1, 3)))

    def test_toggle_count_is_uniform(self):
        points = sample_binary_neighborhood(3, _spec(SamplerKind.BINARY_TOGGLE, n=100_000, seed=3))
        toggled = 3 - points[1:].sum(axis=1)
        for m in (1, 2, 3):
            with self.subTest(m=m):
                self.assertAlmostEqual(np.mean(toggled == m), 1.0 / 3.0, delta=0.01)

    def test_rows_only_toggle_bits_off(self):
        points = sample_binary_neighborhood(7, _spec(SamplerKind.BINARY_TOGGLE, n=500, seed=1))
        assert_array_equal(points[0], np.ones(7))
        self.assertTrue(np.all(np.isin(points, (0.0, 1.0))))
        # every non-target row differs from the target
        self.assertTrue(np.all(points[1:].sum(axis=1) < 7))

    def test_bits_are_exchangeable(self):
        points = sample_binary_neighborhood(4, _spec(SamplerKind.BINARY_TOGGLE, n=80_000, seed=4))
        off_rate = 1.0 - points[1:].mean(axis=0)
        # E[#off] = (d + 1) / 2 spread evenly over d bits
        assert_allclose(off_rate, np.full(4, 2.5 / 4), atol=0.01)

    def test_wrong_kind_rejected(self):
        with self.assertRaises(ConfigError):
            sample_binary_neighborhood(3, _spec(SamplerKind.GAUSSIAN_OFFSET))


class ContinuousSamplerTests(unittest.TestCase):
    def test_uniform_cube_moments_and_support(self):
        full = sample_uniform_cube(2, _spec(SamplerKind.UNIFORM_CUBE, sigma=1.0, n=100_000))
        assert_allclose(full.mean(axis=0), [0.5, 0.5], atol=0.01)

        narrow = sample_uniform_cube(5, _spec(SamplerKind.UNIFORM_CUBE, sigma=0.2, n=1000))
        self.assertTrue(np.all((narrow >= 0.8 - 1e-15) & (narrow <= 1.0)))

        tiny = sample_uniform_cube(5, _spec(SamplerKind.UNIFORM_CUBE, sigma=1e-6, n=1000))
        self.assertTrue(np.all(np.abs(tiny - 1.0) <= 1e-6 + 1e-15))

    def test_uniform_cube_bandwidth_range(self):
        for sigma in (1.5, 0.0, -0.1, float("nan")):
            with self.subTest(sigma=sigma):
                with self.assertRaises(InvalidSigma):
                    _spec(SamplerKind.UNIFORM_CUBE, sigma=sigma)

    def test_gaussian_offsets(self):
        wide = sample_gaussian_offsets(3, _spec(SamplerKind.GAUSSIAN_OFFSET, sigma=1.0, n=100_000))
        assert_allclose(wide.var(axis=0), np.ones(3), atol=0.05)

        tight = sample_gaussian_offsets(3, _spec(SamplerKind.GAUSSIAN_OFFSET, sigma=1e-9, n=1000))
        self.assertLess(np.max(np.abs(tight)), 1e-7)

        with self.assertRaises(InvalidSigma):
            _spec(SamplerKind.GAUSSIAN_OFFSET, sigma=0.0)

    def test_seed_determinism(self):
        for kind in SamplerKind:
            with self.subTest(kind=kind):
                first = sample_neighborhood(5, _spec(kind, n=40, seed=21))
                again = sample_neighborhood(5, _spec(kind, n=40, seed=21))
                other = sample_neighborhood(5, _spec(kind, n=40, seed=22))
                assert_array_equal(first, again)
                self.assertFalse(np.array_equal(first, other))

    def test_sample_size_must_be_positive(self):
        with self.assertRaises(ConfigError):
            _spec(SamplerKind.GAUSSIAN_OFFSET, n=0)


class KernelTests(unittest.TestCase):
    def test_examples(self):
        target = np.ones(10)
        self.assertEqual(kernel_weight(target, target, KernelSpec(0.3)), 1.0)

        one_off = target.copy()
        one_off[4] = 0.0
        self.assertAlmostEqual(
            kernel_weight(target, one_off, KernelSpec(0.1)) / np.exp(-100.0), 1.0, delta=1e-12
        )

        point = np.array([0.6, 0.8])  # distance 1 from the origin
        self.assertAlmostEqual(kernel_weight(np.zeros(2), point, KernelSpec(1.0)), np.exp(-1.0), delta=1e-15)

    def test_monotonicity(self):
        rng = make_rng(8)
        for _ in range(100):
            d = int(rng.integers(1, 6))
            target = rng.standard_normal(d)
            direction = rng.standard_normal(d)
            direction /= np.linalg.norm(direction)
            near, far = sorted(rng.uniform(0.05, 2.0, size=2))
            sigma = float(rng.uniform(0.5, 3.0))
            kernel = KernelSpec(sigma)

            w_near = kernel_weight(target, target + near * direction, kernel)
            w_far = kernel_weight(target, target + far * direction, kernel)
            w_wider = kernel_weight(target, target + near * direction, KernelSpec(2.0 * sigma))
            self.assertTrue(0.0 < w_far < w_near <= 1.0)
            self.assertGreater(w_wider, w_near)

    def test_vectorised_matches_scalar(self):
        rng = make_rng(12)
        target = rng.standard_normal(4)
        points = rng.standard_normal((20, 4))
        kernel = KernelSpec(1.3)
        expected = [kernel_weight(target, p, kernel) for p in points]
        assert_allclose(kernel_weights(target, points, kernel), expected, rtol=1e-14)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            kernel_weight(np.ones(3), np.ones(2), KernelSpec(1.0))

    def test_binary_neighborhood_concentrates_at_small_bandwidth(self):
        n = 5000
        points = sample_binary_neighborhood(13, _spec(SamplerKind.BINARY_TOGGLE, n=n, seed=0))
        weights = kernel_weights(np.ones(13), points, KernelSpec(0.1))
        self.assertEqual(weights[0], 1.0)
        self.assertTrue(np.all(weights[1:] <= np.exp(-100.0)))
        self.assertLess(effective_sample_size(weights), 1.0 + n * np.exp(-100.0) + 1e-12)


class ConversionTests(unittest.TestCase):
    def setUp(self):
        self.target = np.array([2.0, -1.0, 4.0, 0.5])
        self.baseline = np.array([1.0, 1.0, -2.0, 0.0])
        self.conversion = ConversionSpec.segmented(
            self.target, segmentation=np.array([0, 0, 1, 2]), baseline=self.baseline
        )

    def test_segmented_endpoints(self):
        assert_array_equal(convert(self.conversion, np.ones(3)), self.target)
        assert_array_equal(convert(self.conversion, np.zeros(3)), self.baseline)
        assert_array_equal(convert(self.conversion, self.conversion.surrogate_target), self.target)

    def test_tabular_adds_offsets(self):
        conversion = ConversionSpec.tabular(np.array([1.5, -2.0]))
        assert_allclose(convert(conversion, np.array([0.1, 0.2])), [1.6, -1.8])
        assert_array_equal(convert(conversion, conversion.surrogate_target), [1.5, -2.0])

    def test_segmented_output_between_baseline_and_target(self):
        rng = make_rng(31)
        low = np.minimum(self.baseline, self.target)
        high = np.maximum(self.baseline, self.target)
        converted = convert_batch(self.conversion, rng.random((200, 3)))
        self.assertTrue(np.all(converted >= low - 1e-12))
        self.assertTrue(np.all(converted <= high + 1e-12))

    def test_dimensions(self):
        self.assertEqual(self.conversion.original_dimension, 4)
        self.assertEqual(self.conversion.surrogate_dimension, 3)
        self.assertFalse(self.conversion.is_feature_aligned)
        self.assertTrue(ConversionSpec.segmented(self.target).is_feature_aligned)
        with self.assertRaises(DimensionMismatch):
            convert(self.conversion, np.ones(4))

    def test_segmentation_required(self):
        with self.assertRaises(MissingSegmentation):
            ConversionSpec(kind=ConversionKind.SEGMENTED, target=self.target)
        with self.assertRaises(MissingSegmentation):
            ConversionSpec.segmented(self.target, segmentation=np.array([0, 0, 2, 2]))

    def test_fixed_length_segmentation(self):
        assert_array_equal(fixed_length_segmentation(5, 2), [0, 0, 1, 1, 2])


class EffectiveSampleSizeTests(unittest.TestCase):
    def test_examples(self):
        self.assertAlmostEqual(effective_sample_size(np.ones(100)), 100.0, delta=1e-9)
        self.assertAlmostEqual(
            effective_sample_size(np.r_[1.0, np.full(99, 1e-40)]), 1.0, delta=1e-12
        )
        self.assertAlmostEqual(effective_sample_size(np.array([2.0, 2.0, 1.0, 1.0])), 3.6, delta=1e-12)

    def test_bounds(self):
        rng = make_rng(2)
        for _ in range(100):
            weights = rng.random(int(rng.integers(1, 50))) + 1e-6
            ess = effective_sample_size(weights)
            self.assertGreaterEqual(ess, 1.0 - 1e-12)
            self.assertLessEqual(ess, weights.size + 1e-9)

    def test_empty(self):
        with self.assertRaises(EmptyWeights):
            effective_sample_size(np.array([]))
        with self.assertRaises(EmptyWeights):
            effective_sample_size(np.zeros(3))


class SegmentationFileTests(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self):
        shutil.rmtree(self.root, ignore_errors=True)
        self.temp_dir.cleanup()

    def test_round_trip(self):
        segmentation = np.array([2, 0, 1, 1, 0])
        path = self.root / "segments.csv"
        save_segmentation_csv(segmentation, path)

        self.assertTrue(path.read_text().startswith("original_index,segment_index\n"))
        assert_array_equal(load_segmentation_csv(path), segmentation)

    def test_rows_may_come_in_any_order(self):
        path = self.root / "shuffled.csv"
        path.write_text("original_index,segment_index\n2,1\n0,0\n1,0\n")
        assert_array_equal(load_segmentation_csv(path), [0, 0, 1])

    def test_bad_files(self):
        header = self.root / "header.csv"
        header.write_text("feature,segment\n0,0\n")
        missing = self.root / "missing.csv"
        missing.write_text("original_index,segment_index\n0,0\n2,1\n")
        for path in (header, missing):
            with self.subTest(path=path.name):
                with self.assertRaises(DatasetError):
                    load_segmentation_csv(path)


if __name__ == "__main__":
    unittest.main()
