"""
Tests for EPE, PSNR and SSIM.
"""
import unittest

import numpy as np

from inpaint_core.errors import EmptyRegionError, ShapeError
from inpaint_core.flow_io import FlowField
from inpaint_core.metrics import PSNR_CAP, gaussian_window, metric_epe, metric_psnr, metric_psnr_ssim, metric_ssim


class TestEpe(unittest.TestCase):

    def test_identical_fields(self):
        flow = FlowField(np.random.default_rng(0).normal(size=(4, 5, 2)))
        self.assertEqual(metric_epe(flow, flow), 0.0)

    def test_constant_offset(self):
        self.assertAlmostEqual(metric_epe(np.zeros((3, 3, 2)), np.tile([3.0, 4.0], (3, 3, 1))), 5.0)

    def test_masked_region(self):
        gt = np.zeros((2, 2, 2))
        pred = gt.copy()
        pred[0, 0] = (1.0, 0.0)
        mask = np.array([[1, 1], [0, 0]])
        self.assertAlmostEqual(metric_epe(pred, gt, mask), 0.5)

    def test_empty_mask(self):
        with self.assertRaises(EmptyRegionError):
            metric_epe(np.zeros((2, 2, 2)), np.zeros((2, 2, 2)), np.zeros((2, 2)))

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            metric_epe(np.zeros((2, 2, 2)), np.zeros((2, 3, 2)))


class TestPsnr(unittest.TestCase):

    def test_identical_is_capped(self):
        x = np.random.default_rng(1).random((8, 8, 3))
        self.assertEqual(metric_psnr(x, x), PSNR_CAP)

    def test_known_mse(self):
        self.assertAlmostEqual(metric_psnr(np.full((4, 4), 0.1), np.zeros((4, 4))), 20.0)

    def test_mask_broadcasts_over_channels(self):
        pred = np.zeros((2, 2, 3))
        pred[1] = 0.5
        mask = np.array([[1, 1], [0, 0]])
        self.assertEqual(metric_psnr(pred, np.zeros((2, 2, 3)), mask), PSNR_CAP)


class TestSsim(unittest.TestCase):

    def test_identical_is_one(self):
        x = np.random.default_rng(2).random((16, 16, 3))
        self.assertAlmostEqual(metric_ssim(x, x), 1.0, places=12)

    def test_noise_lowers_ssim(self):
        rng = np.random.default_rng(3)
        x = rng.random((20, 20))
        noisy = np.clip(x + rng.normal(0, 0.2, size=x.shape), 0, 1)
        self.assertLess(metric_ssim(noisy, x), 0.9)

    def test_small_frames_shrink_the_window(self):
        x = np.random.default_rng(4).random((6, 9, 3))
        self.assertAlmostEqual(metric_ssim(x, x), 1.0, places=12)

    def test_window_is_normalized(self):
        self.assertAlmostEqual(float(gaussian_window().sum()), 1.0)

    def test_pair_helper(self):
        x = np.zeros((12, 12, 3))
        psnr, ssim = metric_psnr_ssim(x, x)
        self.assertEqual(psnr, PSNR_CAP)
        self.assertAlmostEqual(ssim, 1.0)


if __name__ == '__main__':
    unittest.main()
