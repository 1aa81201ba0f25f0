"""
Tests for the finite-difference gradient checker.
"""
import unittest

import numpy as np

from inpaint_core.errors import NonFiniteError
from inpaint_core.gradcheck import finite_diff_gradcheck, gradcheck_parameters, relative_error
from inpaint_core.nn import Linear
from inpaint_core.tensor import Tensor, record, sigmoid, tsum


class TestGradcheck(unittest.TestCase):

    def test_correct_gradient_passes(self):
        err = finite_diff_gradcheck(lambda x: tsum(sigmoid(x) * x), np.linspace(-2, 2, 7))
        self.assertLess(err, 1e-8)

    def test_wrong_gradient_is_detected(self):
        def doubled(x):
            # forward is x^2 but the recorded gradient is 4x
            return tsum(record(x.data ** 2, (x,), lambda g: (g * 4.0 * x.data,), "bad_square"))

        self.assertGreater(finite_diff_gradcheck(doubled, np.array([1.0, 2.0])), 0.4)

    def test_non_finite_output_raises(self):
        with self.assertRaises(NonFiniteError):
            finite_diff_gradcheck(lambda x: tsum(x * np.inf), np.ones(2))

    def test_relative_error_scale(self):
        self.assertAlmostEqual(relative_error(np.array([1.0, 2.0]), np.array([1.0, 2.2])), 0.1 / 1.1)

    def test_parameters_are_restored(self):
        layer = Linear(3, 2, np.random.default_rng(0))
        before = layer.weight.data.copy()
        x = Tensor(np.random.default_rng(1).normal(size=(4, 3)))
        errors = gradcheck_parameters(lambda: tsum(layer(x) ** 2), layer.parameters())
        np.testing.assert_array_equal(layer.weight.data, before)
        self.assertEqual(set(errors), {"weight", "bias"})
        self.assertLess(max(errors.values()), 1e-6)


if __name__ == '__main__':
    unittest.main()
