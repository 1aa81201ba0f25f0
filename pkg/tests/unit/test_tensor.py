"""
Tests for the reverse-mode tensor core.
"""
import unittest

import numpy as np

from inpaint_core.errors import NonFiniteError, ShapeError
from inpaint_core.gradcheck import finite_diff_gradcheck
from inpaint_core.tensor import (Parameter, Tensor, concat, detect_anomaly, exp, log, matmul, mean, no_grad,
                                 pad, reshape, softmax, stack, take, tsum, where)


class TestTensorBasics(unittest.TestCase):
    """Construction, dtype handling and the leaf gradient contract."""

    def test_integer_input_becomes_float64(self):
        t = Tensor([1, 2, 3])
        self.assertEqual(t.dtype, np.float64)

    def test_float32_is_kept(self):
        t = Tensor(np.ones(3, dtype=np.float32))
        self.assertEqual(t.dtype, np.float32)

    def test_parameter_requires_grad(self):
        p = Parameter(np.zeros(2), name="w")
        self.assertTrue(p.requires_grad)
        self.assertEqual(p.name, "w")

    def test_backward_of_square_sum(self):
        x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
        tsum(x * x).backward()
        np.testing.assert_allclose(x.grad, [2.0, -4.0, 6.0])

    def test_gradients_accumulate_across_backward_calls(self):
        x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        tsum(x * 3.0).backward()
        tsum(x * 3.0).backward()
        np.testing.assert_allclose(x.grad, [6.0, 6.0])

    def test_backward_needs_grad_for_non_scalar(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with self.assertRaises(ShapeError):
            (x * 2.0).backward()

    def test_shared_subexpression_gradient(self):
        x = Tensor(np.array(2.0), requires_grad=True)
        y = x * x
        (y + y * x).backward()
        # d/dx (x^2 + x^3) = 2x + 3x^2
        self.assertAlmostEqual(float(x.grad), 4.0 + 12.0)

    def test_broadcast_gradient_is_reduced(self):
        x = Tensor(np.ones((1, 3)), requires_grad=True)
        y = Tensor(np.ones((4, 3)))
        tsum(x * y).backward()
        np.testing.assert_allclose(x.grad, np.full((1, 3), 4.0))

    def test_incompatible_broadcast_raises_shape_error(self):
        with self.assertRaises(ShapeError):
            Tensor(np.ones((2, 3))) + Tensor(np.ones((4, 3)))

    def test_ndarray_on_the_left_dispatches_to_tensor(self):
        x = Tensor(np.ones(2), requires_grad=True)
        out = np.array([2.0, 3.0]) * x
        self.assertIsInstance(out, Tensor)
        tsum(out).backward()
        np.testing.assert_allclose(x.grad, [2.0, 3.0])


class TestGradMode(unittest.TestCase):

    def test_no_grad_records_nothing(self):
        x = Tensor(np.ones(2), requires_grad=True)
        with no_grad():
            y = x * 2.0
        self.assertFalse(y.requires_grad)

    def test_detect_anomaly_names_the_op(self):
        x = Tensor(np.array([0.0]), requires_grad=True)
        with detect_anomaly():
            with self.assertRaises(NonFiniteError) as ctx:
                log(x)
        self.assertEqual(ctx.exception.op, "log")

    def test_without_anomaly_mode_nan_passes(self):
        out = log(Tensor(np.array([-1.0])))
        self.assertTrue(np.isnan(out.data).all())


class TestShapeOps(unittest.TestCase):

    def test_matmul_batch_and_gradient(self):
        rng = np.random.default_rng(0)
        b = Tensor(rng.normal(size=(4, 2)))
        err = finite_diff_gradcheck(lambda a: tsum(matmul(a, b) ** 2), rng.normal(size=(3, 5, 4)))
        self.assertLess(err, 1e-6)

    def test_matmul_inner_mismatch(self):
        with self.assertRaises(ShapeError):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))

    def test_reshape_invalid(self):
        with self.assertRaises(ShapeError):
            reshape(Tensor(np.ones(6)), (4, 2))

    def test_take_gradient_scatters_repeats(self):
        x = Tensor(np.arange(4.0), requires_grad=True)
        tsum(take(x, [0, 0, 3], axis=0)).backward()
        np.testing.assert_allclose(x.grad, [2.0, 0.0, 0.0, 1.0])

    def test_concat_and_stack(self):
        a, b = Tensor(np.ones((2, 3))), Tensor(np.zeros((2, 3)))
        self.assertEqual(concat([a, b], axis=0).shape, (4, 3))
        self.assertEqual(stack([a, b], axis=1).shape, (2, 2, 3))
        with self.assertRaises(ShapeError):
            concat([a, Tensor(np.ones((2, 4)))], axis=0)

    def test_pad_is_zero_padding(self):
        out = pad(Tensor(np.ones((2, 2))), [(1, 0), (0, 2)])
        self.assertEqual(out.shape, (3, 4))
        self.assertEqual(float(out.data.sum()), 4.0)

    def test_getitem_gradient(self):
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        tsum(x[:, 1:]).backward()
        np.testing.assert_allclose(x.grad, [[0, 1, 1], [0, 1, 1]])

    def test_where_routes_gradients(self):
        a = Tensor(np.ones(3), requires_grad=True)
        b = Tensor(np.ones(3), requires_grad=True)
        tsum(where(np.array([True, False, True]), a, b)).backward()
        np.testing.assert_allclose(a.grad, [1, 0, 1])
        np.testing.assert_allclose(b.grad, [0, 1, 0])


class TestReductions(unittest.TestCase):

    def test_softmax_rows_sum_to_one(self):
        x = Tensor(np.random.default_rng(1).normal(size=(3, 5)) * 50.0)
        np.testing.assert_allclose(softmax(x, axis=-1).data.sum(axis=-1), np.ones(3), atol=1e-12)

    def test_mean_keepdims_gradient(self):
        err = finite_diff_gradcheck(lambda x: tsum(exp(mean(x, axis=1, keepdims=True) * x)),
                                    np.random.default_rng(2).normal(size=(2, 4)))
        self.assertLess(err, 1e-6)


if __name__ == '__main__':
    unittest.main()
