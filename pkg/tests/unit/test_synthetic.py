"""
Tests for the synthetic scene renderer.
"""
import unittest

import numpy as np

from inpaint_core.functional import warp_array
from inpaint_core.synthetic import Sprite, SyntheticScene, TextureSpec, gen_synthetic_scene, random_scene


class TestSyntheticScene(unittest.TestCase):

    def setUp(self):
        self.scene = random_scene(32, 40, 6, seed=4, num_sprites=2)
        self.sample = gen_synthetic_scene(self.scene)

    def test_shapes_and_range(self):
        s = self.sample
        self.assertEqual(s.frames.shape, (6, 32, 40, 3))
        self.assertEqual(s.forward.shape, (5, 32, 40, 2))
        self.assertEqual(s.occ_backward.shape, (5, 32, 40))
        self.assertGreaterEqual(float(s.frames.min()), 0.0)
        self.assertLessEqual(float(s.frames.max()), 1.0)

    def test_forward_flow_warps_next_frame_onto_current(self):
        """Backward-warping frame t+1 with the forward flow reproduces frame t where visible."""
        s = self.sample
        for t in range(5):
            warped = warp_array(s.frames[t + 1], s.forward[t])
            visible = s.occ_forward[t] == 0
            self.assertGreater(int(visible.sum()), 0)
            self.assertLess(float(np.abs(warped - s.frames[t])[visible].max()), 1e-3)

    def test_backward_flow_warps_previous_frame(self):
        s = self.sample
        for t in range(5):
            warped = warp_array(s.frames[t], s.backward[t])
            visible = s.occ_backward[t] == 0
            self.assertLess(float(np.abs(warped - s.frames[t + 1])[visible].max()), 1e-3)

    def test_sprites_stay_inside(self):
        for sprite in self.scene.sprites:
            for t in range(self.scene.length):
                y, x = sprite.position(t)
                self.assertGreaterEqual(y, 0)
                self.assertGreaterEqual(x, 0)
                self.assertLessEqual(y + sprite.height, self.scene.height)
                self.assertLessEqual(x + sprite.width, self.scene.width)

    def test_seed_is_reproducible(self):
        again = gen_synthetic_scene(random_scene(32, 40, 6, seed=4, num_sprites=2))
        np.testing.assert_array_equal(again.frames, self.sample.frames)

    def test_sprite_leaving_frame_is_occluded(self):
        background = TextureSpec(base=(0.5, 0.5, 0.5))
        sprite = Sprite(4.0, 14.0, 4, 4, 2.0, 0.0, TextureSpec(base=(0.9, 0.1, 0.1)))
        sample = gen_synthetic_scene(SyntheticScene(12, 18, 2, background, [sprite]))
        # the rightmost sprite columns move past x = 17
        self.assertTrue(sample.occ_forward[0, 4:8, 16:18].all())
        self.assertFalse(sample.occ_forward[0, 0, 0])


if __name__ == '__main__':
    unittest.main()
