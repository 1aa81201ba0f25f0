"""
Tests for frame index sampling.
"""
import unittest

import numpy as np

from inpaint_core.sampling import (clip_choice, global_indices, lafc_flow_indices, local_window,
                                   sliding_window_sampler, target_position, training_indices, window_targets)


class TestLocalWindow(unittest.TestCase):

    def test_centred_window(self):
        self.assertEqual(local_window(20, 10, 2), [8, 9, 10, 11, 12])

    def test_shifted_at_sequence_start(self):
        self.assertEqual(local_window(20, 0, 2), [0, 1, 2, 3, 4])

    def test_shifted_at_sequence_end(self):
        self.assertEqual(local_window(20, 19, 2), [15, 16, 17, 18, 19])

    def test_short_sequence_returns_everything(self):
        self.assertEqual(local_window(3, 1, 2), [0, 1, 2])

    def test_target_outside_sequence(self):
        with self.assertRaises(IndexError):
            local_window(5, 5, 1)


class TestGlobalFrames(unittest.TestCase):

    def test_multiples_of_interval_minus_locals(self):
        local, globals_ = sliding_window_sampler(20, 0, 2, 5)
        self.assertEqual(local, [0, 1, 2, 3, 4])
        self.assertEqual(globals_, [5, 10, 15])

    def test_locals_excluded_in_the_middle(self):
        _, globals_ = sliding_window_sampler(20, 10, 2, 5)
        self.assertEqual(globals_, [0, 5, 15])

    def test_interval_below_one_is_clamped(self):
        self.assertEqual(global_indices(3, 0), [0, 1, 2])


class TestInferenceTargets(unittest.TestCase):

    def test_every_frame_once(self):
        self.assertEqual(window_targets(6), [0, 1, 2, 3, 4, 5])

    def test_target_position(self):
        local = local_window(20, 0, 2)
        self.assertEqual(target_position(local, 0), 0)
        self.assertEqual(target_position(local_window(20, 10, 2), 10), 2)


class TestTrainingIndices(unittest.TestCase):

    def test_global_frames_capped_and_sorted(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            local, globals_ = training_indices(40, rng, 2, 3, 3)
            self.assertEqual(len(local), 5)
            self.assertLessEqual(len(globals_), 3)
            self.assertEqual(globals_, sorted(globals_))
            self.assertFalse(set(local) & set(globals_))

    def test_same_seed_same_draws(self):
        a = training_indices(30, np.random.default_rng(4), 2, 5, 3)
        b = training_indices(30, np.random.default_rng(4), 2, 5, 3)
        self.assertEqual(a, b)


class TestFlowIndices(unittest.TestCase):

    def test_interval_spaced_and_clamped(self):
        self.assertEqual(lafc_flow_indices(19, 9, 1, 3), [6, 9, 12])
        self.assertEqual(lafc_flow_indices(19, 1, 1, 3), [0, 1, 4])
        self.assertEqual(lafc_flow_indices(19, 18, 1, 3), [15, 18, 18])

    def test_single_flow(self):
        self.assertEqual(lafc_flow_indices(5, 2, 0, 3), [2])

    def test_clip_choice_skips_excluded(self):
        rng = np.random.default_rng(0)
        picks = {clip_choice(rng, 2, exclude=0) for _ in range(20)}
        self.assertEqual(picks, {1})


if __name__ == '__main__':
    unittest.main()
