import shutil
import tempfile
import unittest
from pathlib import Path

import numpy as np
from numpy.testing import assert_array_equal

from slime.blackbox import Dataset
from slime.datasets import (
    WINE_FEATURES,
    load_dataset_csv,
    make_sparse_logistic_dataset,
    make_synthetic_dataset,
    make_wine_like_dataset,
    make_xor_dataset,
    save_dataset_csv,
)
from slime.errors import DatasetError, DimensionMismatch


class DatasetCsvTests(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self):
        shutil.rmtree(self.root, ignore_errors=True)
        self.temp_dir.cleanup()

    def _write(self, name, text):
        path = self.root / name
        path.write_text(text)
        return path

    def test_round_trip_is_exact(self):
        dataset, _ = make_sparse_logistic_dataset(m=50, d=4, support=2, seed=3)
        path = self.root / "data.csv"
        save_dataset_csv(dataset, path, header_comments={"kind": "sparse-logistic", "seed": 3})

        text = path.read_text()
        self.assertTrue(text.startswith("# kind=sparse-logistic\n# seed=3\nx0,x1,x2,x3,label\n"))
        loaded = load_dataset_csv(path)
        assert_array_equal(loaded.features, dataset.features)
        assert_array_equal(loaded.labels, dataset.labels)
        self.assertEqual(loaded.feature_names, dataset.feature_names)

    def test_reads_plain_csv(self):
        path = self._write("plain.csv", "height,weight,label\n1.5,60,0\n1.8,80,1\n1.7,75,1\n")
        dataset = load_dataset_csv(path)

        self.assertEqual(dataset.feature_names, ("height", "weight"))
        self.assertEqual(dataset.size, 3)
        assert_array_equal(dataset.labels, [0, 1, 1])

    def test_malformed_files(self):
        cases = {
            "empty.csv": "",
            "text.csv": "a,label\n1.0,0\nabc,1\n",
            "missing.csv": "a,b,label\n1.0,,0\n2.0,3.0,1\n",
            "labels.csv": "a,label\n1.0,0\n2.0,2\n",
            "single.csv": "label\n0\n1\n",
        }
        for name, text in cases.items():
            with self.subTest(file=name):
                with self.assertRaises(DatasetError):
                    load_dataset_csv(self._write(name, text))


class DatasetValidationTests(unittest.TestCase):
    def test_rejects_inconsistent_inputs(self):
        with self.assertRaises(DatasetError):
            Dataset(features=np.zeros((3, 2)), labels=np.array([0, 1, 3]), feature_names=("a", "b"))
        with self.assertRaises(DimensionMismatch):
            Dataset(features=np.zeros((3, 2)), labels=np.array([0, 1, 1]), feature_names=("a",))
        with self.assertRaises(DatasetError):
            Dataset(features=np.zeros((1, 2)), labels=np.array([1]), feature_names=("a", "b"))
        with self.assertRaises(DatasetError):
            Dataset(
                features=np.array([[0.0, np.nan], [1.0, 1.0]]),
                labels=np.array([0, 1]),
                feature_names=("a", "b"),
            )


class SyntheticDatasetTests(unittest.TestCase):
    def test_sparse_logistic(self):
        dataset, weights = make_sparse_logistic_dataset(m=400, d=8, support=3, seed=1)
        again, _ = make_sparse_logistic_dataset(m=400, d=8, support=3, seed=1)

        self.assertEqual(np.count_nonzero(weights), 3)
        nonzero = np.abs(weights[weights != 0.0])
        self.assertTrue(np.all((nonzero >= 1.0) & (nonzero <= 2.0)))
        assert_array_equal(dataset.features, again.features)
        assert_array_equal(dataset.labels, again.labels)
        self.assertEqual(set(np.unique(dataset.labels)), {0, 1})
        with self.assertRaises(ValueError):
            make_sparse_logistic_dataset(d=3, support=4)

    def test_wine_like_follows_its_rule(self):
        dataset = make_wine_like_dataset(m=300, seed=2)
        column = {name: dataset.features[:, i] for i, name in enumerate(dataset.feature_names)}
        expected = ((column["flavanoids"] > 2.0) & (column["proline"] > 700.0)) | (
            (column["alcohol"] > 13.5) & (column["color_intensity"] > 5.0)
        )

        self.assertEqual(dataset.dimension, len(WINE_FEATURES))
        self.assertTrue(np.all(dataset.features >= 0.0))
        assert_array_equal(dataset.labels, expected.astype(int))
        self.assertEqual(set(np.unique(dataset.labels)), {0, 1})

    def test_xor(self):
        dataset = make_xor_dataset(m=200, noise=0.0, seed=4)
        assert_array_equal(dataset.labels, (np.sign(dataset.features[:, 0]) != np.sign(dataset.features[:, 1])).astype(int))

    def test_dispatch(self):
        self.assertEqual(make_synthetic_dataset("xor", m=20).dimension, 2)
        self.assertEqual(make_synthetic_dataset("sparse-logistic", m=20, d=6).dimension, 6)
        self.assertEqual(make_synthetic_dataset("wine-like", m=20).dimension, 13)
        with self.assertRaises(ValueError):
            make_synthetic_dataset("spiral", m=20)


if __name__ == "__main__":
    unittest.main()
