"""
Tests for the flow-guided transformer layout and forward pass.
"""
import unittest

import numpy as np

from inpaint_core.errors import ConfigError, ShapeError
from inpaint_core.tensor import Tensor, concat
from inpaint_core.tokens import TokenGeometry
from inpaint_core.transformer import FeedForward, FgtConfig, FgtNet, FlowFeatureIntegration, composite


def _tiny_config(**overrides):
    values = dict(channels=8, heads=2, num_blocks=2, zones=2, window=2, global_stride=2, local_radius=1,
                  kernel=3, stride=2, padding=1, encoder_channels=8, fold_channels=2, fgfp_blocks=1,
                  fgfi_blocks=1)
    values.update(overrides)
    return FgtConfig(**values)


class TestDefaultLayout(unittest.TestCase):
    """Structure of the full-size model."""

    @classmethod
    def setUpClass(cls):
        cls.summary = FgtNet(FgtConfig(), np.random.default_rng(0), frame_size=(64, 112)).describe()

    def test_eight_alternating_blocks(self):
        kinds = [b["kind"] for b in self.summary["blocks"]]
        self.assertEqual(len(kinds), 8)
        self.assertEqual(kinds, ["temporal", "spatial"] * 4)

    def test_flow_token_integration_only_in_first_spatial_block(self):
        flagged = [b["index"] for b in self.summary["blocks"] if b["fgfi"]]
        self.assertEqual(flagged, [1])

    def test_propagation_in_encoder_and_first_six_blocks(self):
        self.assertTrue(self.summary["encoder_fgfp"])
        self.assertEqual([b["index"] for b in self.summary["blocks"] if b["fgfp"]], [0, 1, 2, 3, 4, 5])

    def test_spatial_window_and_global_stride(self):
        for block in self.summary["blocks"]:
            if block["kind"] == "spatial":
                self.assertEqual(block["window"], (8, 8))
                self.assertEqual(block["global_stride"], 4)
            else:
                self.assertTrue(block["td"])
                self.assertEqual(block["zones"], (2, 2))

    def test_token_grid_and_zone(self):
        self.assertEqual(tuple(self.summary["token_grid"]), (6, 10))
        self.assertEqual(tuple(self.summary["zone_size"]), (3, 5))


class TestConfigValidation(unittest.TestCase):

    def test_heads_must_divide_channels(self):
        with self.assertRaises(ConfigError):
            FgtConfig(channels=10, heads=4).validate()

    def test_fgfi_blocks_bounded_by_spatial_blocks(self):
        with self.assertRaises(ConfigError):
            _tiny_config(fgfi_blocks=2).validate()

    def test_local_window_size(self):
        self.assertEqual(FgtConfig().num_local, 5)


class TestForward(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(1)
        self.model = FgtNet(_tiny_config(), self.rng, frame_size=(16, 16))
        self.frames = self.rng.random((1, 3, 3, 16, 16))
        self.masks = np.zeros((1, 3, 16, 16))
        self.masks[:, :, 4:10, 4:10] = 1
        self.flows = self.rng.uniform(-1, 1, size=(1, 3, 16, 16, 2))

    def test_output_shape_and_range(self):
        out = self.model(self.frames, self.masks, self.flows, -self.flows).data
        self.assertEqual(out.shape, (1, 3, 3, 16, 16))
        self.assertTrue(((out >= 0) & (out <= 1)).all())

    def test_global_frames_only_add_context(self):
        global_frames = self.rng.random((1, 2, 3, 16, 16))
        global_masks = np.zeros((1, 2, 16, 16))
        out = self.model(self.frames, self.masks, self.flows, -self.flows, global_frames, global_masks)
        self.assertEqual(out.shape, (1, 3, 3, 16, 16))

    def test_hole_content_is_ignored(self):
        """Frames are premultiplied by (1 - M), so hole pixels cannot influence the output."""
        altered = self.frames.copy()
        altered[:, :, :, 4:10, 4:10] = 0.0
        a = self.model(self.frames, self.masks, self.flows, -self.flows).data
        b = self.model(altered, self.masks, self.flows, -self.flows).data
        np.testing.assert_array_equal(a, b)

    def test_runs_on_a_new_extent(self):
        frames = self.rng.random((1, 3, 3, 12, 20))
        masks = np.zeros((1, 3, 12, 20))
        out = self.model(frames, masks)
        self.assertEqual(out.shape, (1, 3, 3, 12, 20))

    def test_mask_mismatch(self):
        with self.assertRaises(ShapeError):
            self.model(self.frames, self.masks[:, :2])

    def test_extent_must_be_divisible_by_four(self):
        with self.assertRaises(ShapeError):
            FgtNet(_tiny_config(), self.rng, frame_size=(18, 16))

    def test_global_frames_need_masks(self):
        global_frames = self.rng.random((1, 2, 3, 16, 16))
        with self.assertRaisesRegex(ShapeError, "global masks None"):
            self.model(self.frames, self.masks, self.flows, -self.flows, global_frames, None)
        with self.assertRaises(ShapeError):
            self.model(self.frames, self.masks, self.flows, -self.flows, global_frames, np.zeros((1, 1, 16, 16)))


class TestAblationVariants(unittest.TestCase):
    """Each switch removes exactly its own modules and leaves the forward contract alone."""

    @classmethod
    def setUpClass(cls):
        cls.full = FgtNet(_tiny_config(), np.random.default_rng(0), frame_size=(16, 16))
        rng = np.random.default_rng(1)
        cls.frames = rng.random((1, 3, 3, 16, 16))
        cls.masks = np.zeros((1, 3, 16, 16))
        cls.masks[:, :, 4:10, 4:10] = 1
        cls.flows = rng.uniform(-1, 1, size=(1, 3, 16, 16, 2))

    def _variant(self, **switch):
        model = FgtNet(_tiny_config(**switch), np.random.default_rng(0), frame_size=(16, 16))
        self.assertEqual(model(self.frames, self.masks, self.flows, -self.flows).shape, (1, 3, 3, 16, 16))
        return model

    def test_without_fgfi(self):
        model = self._variant(use_fgfi=False)
        integration = self.full.blocks[1].integration
        # gate (2C->C, C->C) and projection (2C->C); flow tokens embed 4 * 3 * 3 values
        self.assertEqual(integration.num_parameters(), 5 * 8 * 8 + 3 * 8)
        self.assertEqual(self.full.flow_split.num_parameters(), 4 * 9 * 8 + 8)
        dropped = integration.num_parameters() + self.full.flow_split.num_parameters()
        self.assertEqual(self.full.num_parameters() - model.num_parameters(), dropped)
        self.assertIsNone(model.flow_split)
        self.assertFalse(any(b["fgfi"] for b in model.describe()["blocks"]))
        self.assertTrue(model.describe()["encoder_fgfp"])

    def test_without_fgfp(self):
        model = self._variant(use_fgfp=False)
        dropped = self.full.encoder_propagation.num_parameters() + self.full.blocks[0].ffn.propagation.num_parameters()
        self.assertEqual(self.full.num_parameters() - model.num_parameters(), dropped)
        summary = model.describe()
        self.assertFalse(summary["encoder_fgfp"])
        self.assertFalse(any(b["fgfp"] for b in summary["blocks"]))
        self.assertEqual([b["fgfi"] for b in summary["blocks"]], [False, True])

    def test_without_td(self):
        model = self._variant(use_td=False)
        dropped = self.full.blocks[0].deformable_attention.num_parameters()
        self.assertEqual(self.full.num_parameters() - model.num_parameters(), dropped)
        summary = model.describe()
        self.assertFalse(any(b["td"] for b in summary["blocks"]))
        self.assertTrue(summary["blocks"][0]["fgfp"])

    def test_all_switches_off(self):
        model = self._variant(use_fgfi=False, use_fgfp=False, use_td=False)
        summary = model.describe()
        self.assertFalse(summary["encoder_fgfp"])
        self.assertFalse(any(b["fgfi"] or b["fgfp"] or b["td"] for b in summary["blocks"]))
        self.assertEqual(model(self.frames, self.masks).shape, (1, 3, 3, 16, 16))

    def test_disabled_propagation_matches_flowless_full_model(self):
        model = FgtNet(_tiny_config(use_fgfp=False), np.random.default_rng(2), frame_size=(16, 16))
        model.load_state_dict(self.full.state_dict(), strict=False)
        np.testing.assert_array_equal(model(self.frames, self.masks).data, self.full(self.frames, self.masks).data)


class TestFlowFeatureIntegration(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(5)
        self.block = FlowFeatureIntegration(6, rng)
        self.frame_tokens = Tensor(rng.normal(size=(1, 2, 3, 4, 6)))
        self.flow_tokens = Tensor(rng.normal(size=(1, 2, 3, 4, 6)))

    def _saturate_gate(self, bias: float) -> None:
        self.block.gate_out.weight.data = np.zeros_like(self.block.gate_out.weight.data)
        self.block.gate_out.bias.data = np.full(6, bias)

    def test_closed_gate_drops_flow_tokens(self):
        self._saturate_gate(-10.0)
        gated = self.block.gated_flow_tokens(self.frame_tokens, self.flow_tokens).data
        np.testing.assert_allclose(gated, 0.0, atol=1e-3)
        zeros = Tensor(np.zeros(self.flow_tokens.shape))
        expected = self.block.projection(concat([self.frame_tokens, zeros], axis=-1)).data
        np.testing.assert_allclose(self.block(self.frame_tokens, self.flow_tokens).data, expected, atol=1e-3)

    def test_open_gate_passes_flow_tokens(self):
        self._saturate_gate(10.0)
        gated = self.block.gated_flow_tokens(self.frame_tokens, self.flow_tokens).data
        np.testing.assert_allclose(gated, self.flow_tokens.data, atol=1e-3)

    def test_output_keeps_frame_token_shape(self):
        self.assertEqual(self.block(self.frame_tokens, self.flow_tokens).shape, self.frame_tokens.shape)

    def test_grid_mismatch(self):
        other = Tensor(np.zeros((1, 2, 3, 5, 6)))
        with self.assertRaises(ShapeError):
            self.block(self.frame_tokens, other)


class TestFeedForward(unittest.TestCase):

    def setUp(self):
        self.geometry = TokenGeometry(8, 8, kernel=3, stride=2, padding=1)
        self.x = Tensor(np.random.default_rng(6).normal(size=(1, 3, 4, 4, 8)))

    def test_guided_without_flows_equals_plain(self):
        plain = FeedForward(8, self.geometry, 2, np.random.default_rng(7))
        guided = FeedForward(8, self.geometry, 2, np.random.default_rng(7), propagate=True)
        self.assertIsNotNone(guided.propagation)
        np.testing.assert_array_equal(guided(self.x, 3).data, plain(self.x, 3).data)

    def test_flows_only_matter_with_propagation(self):
        plain = FeedForward(8, self.geometry, 2, np.random.default_rng(7))
        flows = (np.full((1, 3, 8, 8, 2), 0.5), np.full((1, 3, 8, 8, 2), -0.5))
        np.testing.assert_array_equal(plain(self.x, 3, flows).data, plain(self.x, 3).data)

    def test_shape_kept_on_other_grids(self):
        rng = np.random.default_rng(8)
        for height, width in ((6, 10), (9, 7)):
            geometry = TokenGeometry(height, width, kernel=3, stride=2, padding=1)
            ffn = FeedForward(4, geometry, 2, rng, propagate=True)
            gh, gw = geometry.grid
            x = Tensor(rng.normal(size=(1, 3, gh, gw, 4)))
            flows = (np.zeros((1, 2, height, width, 2)), np.zeros((1, 2, height, width, 2)))
            self.assertEqual(ffn(x, 2, flows).shape, x.shape)


class TestComposite(unittest.TestCase):

    def test_blends_by_mask(self):
        prediction = np.ones((2, 3, 2, 2))
        frames = np.zeros((2, 3, 2, 2))
        masks = np.array([[[1, 0], [0, 0]], [[0, 0], [0, 1]]])
        out = composite(prediction, frames, masks)
        self.assertEqual(float(out[0, :, 0, 0].sum()), 3.0)
        self.assertEqual(float(out[0, :, 1, 1].sum()), 0.0)
        self.assertEqual(float(out[1, :, 1, 1].sum()), 3.0)


if __name__ == '__main__':
    unittest.main()
