"""
Tests for the flow-completion network and its losses.
"""
import unittest

import numpy as np

from inpaint_core.errors import ShapeError
from inpaint_core.flow_io import FlowField
from inpaint_core.lafc import (LafcConfig, LafcNet, P3DBlock, edge_targets, flow_losses, prepare_inputs,
                               smoothness_loss)
from inpaint_core.tensor import Tensor


def _inputs(rng, n=1, t=3, h=8, w=12):
    flows = rng.normal(size=(n, t, h, w, 2))
    masks = np.zeros((n, t, h, w))
    masks[:, :, 2:6, 3:8] = 1.0
    return flows, masks


class TestLafcNet(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(0)
        self.config = LafcConfig(local_radius=1, base_channels=4)
        self.model = LafcNet(self.config, self.rng)

    def test_output_shapes(self):
        flows, masks = _inputs(self.rng, n=2)
        out = self.model(flows, masks)
        self.assertEqual(out.flow.shape, (2, 2, 8, 12))
        self.assertEqual(out.composited.shape, (2, 2, 8, 12))
        self.assertEqual(out.edge.shape, (2, 1, 8, 12))
        self.assertTrue(((out.edge.data >= 0) & (out.edge.data <= 1)).all())

    def test_composite_keeps_valid_target_flow(self):
        flows, masks = _inputs(self.rng)
        out = self.model(flows, masks)
        target = flows[0, 1].transpose(2, 0, 1)
        valid = masks[0, 1] == 0
        np.testing.assert_array_equal(out.composited.data[0][:, valid], target[:, valid])

    def test_fresh_head_predicts_zero_flow(self):
        flows, masks = _inputs(self.rng)
        self.assertFalse(self.model(flows, masks).flow.data.any())

    def test_flow_fields_view(self):
        flows, masks = _inputs(self.rng)
        fields = self.model(flows, masks).to_flow_fields()
        self.assertEqual(len(fields), 1)
        self.assertEqual(fields[0].uv.shape, (8, 12, 2))

    def test_rejects_wrong_sequence_length(self):
        flows, masks = _inputs(self.rng, t=5)
        with self.assertRaises(ShapeError):
            self.model(flows, masks)

    def test_rejects_extent_not_divisible_by_four(self):
        flows, masks = _inputs(self.rng, h=10)
        with self.assertRaises(ShapeError):
            self.model(flows, masks)

    def test_single_flow_variant(self):
        model = LafcNet(LafcConfig(local_radius=0, base_channels=2, use_edge_head=False), self.rng)
        flows, masks = _inputs(self.rng, t=1)
        out = model(flows, masks)
        self.assertIsNone(out.edge)
        self.assertEqual(out.flow.shape, (1, 2, 8, 12))

    def test_shrink_block_collapses_time(self):
        block = P3DBlock(3, 4, self.rng, shrink=True, sequence_length=5)
        out = block(Tensor(self.rng.normal(size=(1, 3, 5, 4, 4))))
        self.assertEqual(out.shape, (1, 4, 1, 4, 4))


class TestPrepareInputs(unittest.TestCase):

    def test_fills_holes_and_stacks(self):
        flows = [FlowField(np.full((6, 6, 2), 2.0)) for _ in range(3)]
        masks = [np.zeros((6, 6)) for _ in range(3)]
        for m in masks:
            m[2:4, 2:4] = 1
        filled, stacked = prepare_inputs(flows, masks)
        self.assertEqual(filled.shape, (1, 3, 6, 6, 2))
        self.assertEqual(stacked.shape, (1, 3, 6, 6))
        np.testing.assert_allclose(filled, 2.0, atol=1e-10)


class TestFlowLosses(unittest.TestCase):

    def setUp(self):
        self.config = LafcConfig(local_radius=0)
        rng = np.random.default_rng(2)
        self.frames = rng.random((1, 3, 8, 8))
        self.mask = np.zeros((1, 8, 8))
        self.mask[0, 2:5, 2:5] = 1

    def test_perfect_prediction_has_zero_flow_terms(self):
        gt = np.zeros((1, 2, 8, 8))
        losses = flow_losses(Tensor(gt), gt, self.mask, self.frames, self.frames,
                             np.zeros((1, 8, 8)), None, self.config)
        values = losses.values()
        for name in ("L_c", "L_v", "L_s", "L_w", "L_e", "L_F"):
            self.assertAlmostEqual(values[name], 0.0, places=12)

    def test_weighted_total(self):
        rng = np.random.default_rng(3)
        gt = rng.normal(size=(1, 2, 8, 8))
        pred = Tensor(rng.normal(size=(1, 2, 8, 8)))
        losses = flow_losses(pred, gt, self.mask, self.frames, self.frames, np.zeros((1, 8, 8)),
                             None, self.config)
        values = losses.values()
        expected = sum(values[k] * w for k, w in self.config.weights.items())
        self.assertAlmostEqual(values["L_F"], expected, places=10)

    def test_empty_hole_is_flagged(self):
        gt = np.zeros((1, 2, 8, 8))
        losses = flow_losses(Tensor(gt), gt, np.zeros((1, 8, 8)), self.frames, self.frames,
                             np.zeros((1, 8, 8)), None, self.config)
        self.assertIn("empty_mask", losses.flags)

    def test_smoothness_of_linear_ramp(self):
        ramp = np.tile(np.arange(6.0), (1, 2, 6, 1))
        # |dx| = 1 except the last column; the Laplacian is nonzero only on the border columns
        value = float(smoothness_loss(Tensor(ramp)).data)
        self.assertAlmostEqual(value, 5.0 / 6.0 + 2.0 / 6.0)

    def test_edge_targets_shape(self):
        flows = np.zeros((2, 2, 8, 8))
        flows[:, 0, :, 4:] = 3.0
        targets = edge_targets(flows, self.config)
        self.assertEqual(targets.shape, (2, 1, 8, 8))
        self.assertGreater(float(targets.sum()), 0.0)


if __name__ == '__main__':
    unittest.main()
