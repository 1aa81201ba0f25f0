"""
Tests for Adam and the step schedule.
"""
import unittest

import numpy as np

from inpaint_core.errors import NonFiniteError
from inpaint_core.optim import Adam, AdamState, MultiStepSchedule, adam_step
from inpaint_core.tensor import Parameter, tsum


class TestAdam(unittest.TestCase):

    def test_first_step_moves_by_lr(self):
        """Bias correction makes the first update lr * sign(g)."""
        p = Parameter(np.array([1.0, -1.0]), name="p")
        adam_step([p], [np.array([0.5, -2.0])], AdamState(lr=0.1))
        np.testing.assert_allclose(p.data, [0.9, -0.9], atol=1e-6)

    def test_missing_gradient_counts_as_zero(self):
        p = Parameter(np.ones(2), name="p")
        state = adam_step([p], [None], AdamState(lr=0.1))
        np.testing.assert_array_equal(p.data, np.ones(2))
        self.assertEqual(state.step, 1)

    def test_non_finite_gradient_names_parameter(self):
        p = Parameter(np.ones(2), name="enc.weight")
        with self.assertRaises(NonFiniteError) as ctx:
            adam_step([p], [np.array([np.nan, 0.0])], AdamState())
        self.assertEqual(ctx.exception.parameter, "enc.weight")
        np.testing.assert_array_equal(p.data, np.ones(2))

    def test_minimizes_quadratic(self):
        p = Parameter(np.array([3.0, -2.0]), name="p")
        opt = Adam([p], lr=0.1)
        for _ in range(300):
            opt.zero_grad()
            tsum(p * p).backward()
            opt.step()
        self.assertLess(float(np.abs(p.data).max()), 0.05)

    def test_state_arrays_restore(self):
        p = Parameter(np.ones(3), name="w")
        opt = Adam([p], lr=0.01)
        tsum(p * p).backward()
        opt.step()
        other = Adam([Parameter(p.data.copy(), name="w")], lr=0.01)
        other.load_state_arrays(opt.state_arrays(), opt.state.step)
        np.testing.assert_array_equal(other.state.m["w"], opt.state.m["w"])
        self.assertEqual(other.state.step, 1)


class TestMultiStepSchedule(unittest.TestCase):

    def test_decays_at_milestones(self):
        schedule = MultiStepSchedule(1e-4, [300, 100])
        self.assertEqual(schedule.lr_at(99), 1e-4)
        self.assertAlmostEqual(schedule.lr_at(100), 1e-5)
        self.assertAlmostEqual(schedule.lr_at(300), 1e-6)


if __name__ == '__main__':
    unittest.main()
