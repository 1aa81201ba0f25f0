"""
Tests for the training loops: curves, checkpoints, resume and NaN handling.
"""
import shutil
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np

from inpaint_core.checkpoint import load_checkpoint
from inpaint_core.csv_utils import read_rows_csv
from inpaint_core.datasets import generate_dataset, load_clip
from inpaint_core.errors import CheckpointError, NonFiniteError
from inpaint_core.lafc import LafcConfig
from inpaint_core.run_config import DataSpec, RunConfig, Schedule
from inpaint_core.training import (NAN_DUMP, FgtTrainer, LafcTrainer, fgt_sample, flow_sequence, lafc_sample,
                                   load_lafc)
from inpaint_core.transformer import FgtConfig


def tiny_config(out_dir: Path, data_dir: Path) -> RunConfig:
    return RunConfig(
        seed=5, out_dir=str(out_dir),
        data=DataSpec(clips=2, heldout=1, frames=6, height=16, width=16, mask_kinds=("square_static",),
                      external_dir=str(data_dir)),
        lafc=LafcConfig(local_radius=1, base_channels=4),
        fgt=FgtConfig(channels=8, heads=2, num_blocks=2, zones=2, window=2, global_stride=2, local_radius=1,
                      global_interval=3, num_global=2, kernel=3, stride=2, padding=1, encoder_channels=8,
                      fold_channels=2, fgfp_blocks=1, fgfi_blocks=1),
        schedule=Schedule(lafc_iterations=4, lafc_milestone=2, fgt_iterations=2, fgt_milestone=1,
                          checkpoint_every=2, log_every=1, disc_channels=2),
    )


class TrainingTestCase(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.data_root = Path(tempfile.mkdtemp())
        generate_dataset(tiny_config(cls.data_root / "run", cls.data_root / "data"))

    @classmethod
    def tearDownClass(cls):
        load_clip.cache_clear()
        shutil.rmtree(cls.data_root, ignore_errors=True)

    def setUp(self):
        self.temp_dir = Path(tempfile.mkdtemp())
        self.config = tiny_config(self.temp_dir / "run", self.data_root / "data")

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)


class TestSamples(TrainingTestCase):

    def test_lafc_sample_shapes(self):
        sample = lafc_sample(LafcTrainer(self.config).dirs, self.config, iteration=0)
        self.assertEqual(sample.flows.shape, (1, 3, 16, 16, 2))
        self.assertEqual(sample.target.shape, (1, 2, 16, 16))
        self.assertEqual(sample.frame_src.shape, (1, 3, 16, 16))

    def test_samples_depend_only_on_iteration(self):
        dirs = LafcTrainer(self.config).dirs
        a, b = lafc_sample(dirs, self.config, 3), lafc_sample(dirs, self.config, 3)
        np.testing.assert_array_equal(a.flows, b.flows)

    def test_backward_sequence_uses_destination_masks(self):
        """A backward flow t+1 -> t is corrupted where frame t+1 is masked."""
        clip = load_clip(LafcTrainer(self.config).dirs[0])
        _, masks = flow_sequence(clip, 2, True, 0, 1)
        np.testing.assert_array_equal(masks[0], clip.masks[3])

    def test_fgt_sample_windows(self):
        sample = fgt_sample(FgtTrainer(self.config).dirs, self.config, iteration=0)
        self.assertEqual(sample.local_frames.shape, (1, 3, 3, 16, 16))
        self.assertEqual(sample.flows_prev.shape, (1, 3, 16, 16, 2))
        if sample.global_frames is not None:
            self.assertLessEqual(sample.global_frames.shape[1], 2)


class TestLafcTrainer(TrainingTestCase):

    def test_run_writes_curves_and_checkpoint(self):
        result = LafcTrainer(self.config).run()
        self.assertEqual(result["status"], "success")
        rows = read_rows_csv(result["curves"])
        self.assertEqual([r["iteration"] for r in rows], ["0", "1", "2", "3"])
        self.assertEqual(float(rows[0]["lr"]), 1e-4)
        self.assertAlmostEqual(float(rows[3]["lr"]), 1e-5)
        _, metadata = load_checkpoint(result["checkpoint"])
        self.assertEqual(metadata["iteration"], 3)
        self.assertEqual(metadata["network"], "lafc")

    def test_resume_matches_uninterrupted_run(self):
        """Stopping after two iterations and resuming gives the same weights and curves."""
        straight = LafcTrainer(self.config).run()

        other = tiny_config(self.temp_dir / "resumed", self.data_root / "data")
        LafcTrainer(other).run(max_iterations=2)
        resumed = LafcTrainer(other).run()
        self.assertEqual(resumed["start"], 2)

        expected, _ = load_checkpoint(straight["checkpoint"])
        actual, _ = load_checkpoint(resumed["checkpoint"])
        self.assertEqual(sorted(expected), sorted(actual))
        for key in expected:
            np.testing.assert_array_equal(actual[key], expected[key], err_msg=key)
        self.assertEqual(read_rows_csv(straight["curves"]), read_rows_csv(resumed["curves"]))

    def test_non_finite_step_dumps_state(self):
        with patch.object(LafcTrainer, "step", side_effect=NonFiniteError("L_F is not finite", op="L_F")):
            with self.assertRaises(NonFiniteError) as ctx:
                LafcTrainer(self.config).run()
        self.assertEqual(ctx.exception.iteration, 0)
        self.assertEqual(ctx.exception.op, "L_F")
        self.assertTrue((self.config.checkpoint_dir / NAN_DUMP).exists())

    def test_load_lafc_returns_trained_weights(self):
        trainer = LafcTrainer(self.config)
        trainer.run()
        model = load_lafc(self.config)
        self.assertFalse(model.training)
        for key, value in trainer.model.state_dict().items():
            np.testing.assert_array_equal(model.state_dict()[key], value)


class TestFgtTrainer(TrainingTestCase):

    def test_run_records_every_loss(self):
        result = FgtTrainer(self.config).run()
        rows = read_rows_csv(result["curves"])
        self.assertEqual(len(rows), 2)
        for column in ("L_yc", "L_yv", "L_adv", "L_amp", "L_y", "L_D"):
            self.assertTrue(np.isfinite(float(rows[0][column])), column)

    def test_restore_rejects_other_network(self):
        LafcTrainer(self.config).run(max_iterations=1)
        with self.assertRaises(CheckpointError):
            FgtTrainer(self.config).restore(self.config.checkpoint_dir / "lafc.ckpt")


if __name__ == '__main__':
    unittest.main()
