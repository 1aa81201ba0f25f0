"""
Tests for the assembled run configuration.
"""
import shutil
import tempfile
import unittest
from pathlib import Path

from inpaint_core.errors import ConfigError
from inpaint_core.run_config import (FGT_FULL_ITERATIONS, LAFC_FULL_ITERATIONS, DataSpec, RunConfig, Schedule)


class TestRunConfig(unittest.TestCase):

    def setUp(self):
        self.temp_dir = Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_desk_defaults(self):
        config = RunConfig()
        self.assertEqual((config.data.height, config.data.width), (64, 112))
        self.assertEqual(config.fgt.global_interval, 5)
        self.assertEqual(config.fgt.encoder_channels, 32)
        self.assertEqual(config.data_dir, Path("runs/desk") / "data")

    def test_save_load_round_trip(self):
        config = RunConfig(seed=11, out_dir=str(self.temp_dir / "run"))
        config.lafc.local_radius = 2
        config.data.mask_kinds = ("object",)
        path = config.save(self.temp_dir / "config.ini")
        loaded = RunConfig.load(path)
        self.assertEqual(loaded, config)
        self.assertEqual(loaded.fingerprint(), config.fingerprint())

    def test_fingerprint_tracks_values(self):
        a, b = RunConfig(), RunConfig(seed=1)
        self.assertNotEqual(a.fingerprint(), b.fingerprint())

    def test_unknown_key_rejected(self):
        path = self.temp_dir / "bad.ini"
        path.write_text("[lafc]\nradius = 2\n", encoding="utf-8")
        with self.assertRaises(ConfigError):
            RunConfig.load(path)

    def test_unknown_section_rejected(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_sections({"paths": {"root": "x"}})

    def test_invalid_values_rejected(self):
        path = self.temp_dir / "bad.ini"
        path.write_text("[data]\nwidth = 110\n", encoding="utf-8")
        with self.assertRaises(ConfigError):
            RunConfig.load(path)

    def test_missing_explicit_file(self):
        with self.assertRaises(FileNotFoundError):
            RunConfig.load(self.temp_dir / "absent.ini")

    def test_overrides(self):
        config = RunConfig().with_overrides(seed=5, out_dir="elsewhere", scale=0.01)
        self.assertEqual(config.seed, 5)
        self.assertEqual(config.out_path, Path("elsewhere"))
        self.assertEqual(config.schedule.lafc_iterations, round(LAFC_FULL_ITERATIONS * 0.01))
        self.assertEqual(config.schedule.fgt_iterations, round(FGT_FULL_ITERATIONS * 0.01))
        self.assertEqual(RunConfig().seed, 0)

    def test_external_data_dir(self):
        config = RunConfig(data=DataSpec(external_dir=str(self.temp_dir)))
        self.assertEqual(config.data_dir, self.temp_dir)


class TestSchedule(unittest.TestCase):

    def test_scaled_keeps_milestone_ratio(self):
        schedule = Schedule().scaled(0.5)
        self.assertEqual(schedule.lafc_iterations, 140000)
        self.assertEqual(schedule.lafc_milestone, 60000)
        self.assertEqual(schedule.fgt_milestone, 200000)

    def test_scaled_never_drops_to_zero_iterations(self):
        self.assertEqual(Schedule().scaled(1e-9).lafc_iterations, 1)

    def test_non_positive_factor(self):
        with self.assertRaises(ConfigError):
            Schedule().scaled(0)


if __name__ == '__main__':
    unittest.main()
