"""Smoke tests for the python bindings."""

import json
import tempfile
import unittest

import numpy as np

import dstein


CATEGORICAL = json.dumps({
    "type": "categorical",
    "states": [1.0, 2.0, 3.0, 4.0, 5.0],
    "probs": [0.1, 0.2, 0.25, 0.15, 0.3],
})
ISING = json.dumps({"type": "ising", "rows": 2, "cols": 2, "coupling": 0.2})


class BindingsTest(unittest.TestCase):
    def test_enumerate(self):
        states, probs = dstein.enumerate_model(CATEGORICAL)
        self.assertEqual(states.shape, (5, 1))
        np.testing.assert_allclose(probs.sum(), 1.0, atol=1e-12)
        np.testing.assert_allclose(
            probs.ravel(), [0.1, 0.2, 0.25, 0.15, 0.3], atol=1e-12)

    def test_sample_gfsvgd_recovers_categorical(self):
        samples = dstein.sample_gfsvgd(
            CATEGORICAL, 200, iterations=500, step_size=0.05, seed=1)
        self.assertEqual(samples.shape, (200, 1))
        freq = np.array([(samples == s).mean() for s in [1, 2, 3, 4, 5]])
        tv = 0.5 * np.abs(freq - [0.1, 0.2, 0.25, 0.15, 0.3]).sum()
        self.assertLess(tv, 0.05)

    def test_sample_is_deterministic(self):
        a = dstein.sample_gfsvgd(ISING, 30, iterations=50, seed=7)
        b = dstein.sample_gfsvgd(ISING, 30, iterations=50, seed=7)
        np.testing.assert_array_equal(a, b)

    def test_gibbs_and_mc(self):
        gibbs = dstein.sample_gibbs(ISING, 50, sweeps=100, seed=2)
        mc = dstein.sample_mc(ISING, 50, seed=3)
        self.assertEqual(gibbs.shape, (50, 4))
        self.assertEqual(mc.shape, (50, 4))
        self.assertTrue(np.isin(gibbs, [-1.0, 1.0]).all())
        self.assertTrue(np.isin(mc, [-1.0, 1.0]).all())

    def test_gof_null_accepts(self):
        data = dstein.sample_mc(ISING, 200, seed=4)
        result = dstein.gof_test(ISING, data, bootstrap=500, seed=5)
        self.assertIn("p_value", result)
        self.assertGreaterEqual(result["p_value"], 0.0)
        self.assertLessEqual(result["p_value"], 1.0)
        self.assertFalse(result["reject"])

    def test_mmd_and_bandwidth(self):
        a = dstein.sample_mc(ISING, 100, seed=6)
        self.assertLess(abs(dstein.mmd_hamming(a, a)), 0.02)
        h = dstein.median_bandwidth(np.array([[0.0], [3.0]]))
        np.testing.assert_allclose(h, 9.0 / (2.0 * np.log(3.0)), rtol=1e-12)

    def test_run_experiment(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = {
                "experiment": "categorical_tv",
                "output_dir": tmp + "/out",
                "trials": 2,
                "methods": ["mc"],
                "parameters": [50],
                "model": json.loads(CATEGORICAL),
            }
            result = dstein.run_experiment(json.dumps(config))
            self.assertFalse(result["any_failed"])
            self.assertIn("results.csv", result["artifacts"])
            header = result["csv"].splitlines()[0]
            self.assertEqual(
                header, "experiment,method,parameter,trial,metric,value")


if __name__ == "__main__":
    unittest.main()
