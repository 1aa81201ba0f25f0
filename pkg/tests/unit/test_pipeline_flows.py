"""
Tests for the per-command pipeline flows with the heavy work mocked out.
"""
import shutil
import tempfile
import unittest
from pathlib import Path
from unittest.mock import MagicMock, patch

from inpaint_core import pipeline_flows
from inpaint_core.clip_collection import ClipCollection
from inpaint_core.errors import NonFiniteError, PathCollisionError, ShapeError
from inpaint_core.pipeline_flows import (EvalFlow, GenDataFlow, GradcheckFlow, InferFlow, TrainFgtFlow,
                                         TrainLafcFlow, error_code, flow_for)
from inpaint_core.run_config import RunConfig
from inpaint_core.workflow import FlowContext, Workflow


class FlowTestCase(unittest.TestCase):

    def setUp(self):
        self.temp_dir = Path(tempfile.mkdtemp())
        self.config = RunConfig(seed=4, out_dir=str(self.temp_dir / "run"))

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def context(self, command: str, **params) -> FlowContext:
        return FlowContext(command=command, config=self.config, params=dict(params))


class TestRegistry(unittest.TestCase):

    def test_every_command_has_a_flow(self):
        expected = {"gen-data": GenDataFlow, "train-lafc": TrainLafcFlow, "train-fgt": TrainFgtFlow,
                    "infer": InferFlow, "eval": EvalFlow, "gradcheck": GradcheckFlow}
        for command, kind in expected.items():
            flow = flow_for(command)
            self.assertIsInstance(flow, kind)
            self.assertIsInstance(flow, Workflow)
            self.assertEqual(flow.id(), command)
        self.assertIsNone(flow_for("paint"))

    def test_error_codes(self):
        self.assertEqual(error_code(ShapeError("x")), "shape_mismatch")
        self.assertEqual(error_code(NonFiniteError("x")), "non_finite")
        self.assertEqual(error_code(PermissionError("x")), "io_error")
        self.assertEqual(error_code(ValueError("x")), "invalid_value")


class TestGenDataFlow(FlowTestCase):

    @patch.object(pipeline_flows, "verify_manifest", return_value=[])
    @patch.object(pipeline_flows, "spot_check", return_value={"clip_0000": 0.0})
    @patch.object(pipeline_flows, "generate_dataset", return_value={"clips": [{}, {}, {}]})
    def test_success_runs_steps_in_order(self, generate, spot, verify):
        context = self.context("gen-data", force=True)
        result = GenDataFlow().run(context)
        self.assertEqual(result["status"], "success")
        self.assertEqual([s["step"] for s in result["trace"]],
                         ["save_config", "generate", "warp_spot_check", "verify_manifest"])
        generate.assert_called_once_with(self.config, force=True)
        self.assertIn("Wrote 3 clips", result["summary"])
        self.assertEqual(RunConfig.load(self.temp_dir / "run" / "config.ini"), self.config)

    @patch.object(pipeline_flows, "generate_dataset", side_effect=PathCollisionError("exists"))
    def test_library_error_becomes_status(self, generate):
        with self.assertLogs("inpaint_core.pipeline_flows", level="ERROR"):
            result = GenDataFlow().run(self.context("gen-data"))
        self.assertEqual(result["status"], "error")
        self.assertEqual(result["code"], "path_collision")
        self.assertIn("generate", result["summary"])
        self.assertEqual(result["trace"][-1]["status"], "error")

    @patch.object(pipeline_flows, "verify_manifest", return_value=["train/clip_0000/masks/00000.png"])
    @patch.object(pipeline_flows, "spot_check", return_value={})
    @patch.object(pipeline_flows, "generate_dataset", return_value={"clips": []})
    def test_manifest_mismatch(self, *_):
        result = GenDataFlow().run(self.context("gen-data"))
        self.assertEqual(result["code"], "bad_dataset")
        self.assertIn("clip_0000", result["error"])


class TestTrainFlows(FlowTestCase):

    def test_missing_dataset(self):
        with self.assertLogs("inpaint_core.pipeline_flows", level="ERROR"):
            result = TrainLafcFlow().run(self.context("train-lafc"))
        self.assertEqual(result["code"], "bad_dataset")

    def test_trainer_receives_resume_options(self):
        trainer = MagicMock()
        trainer.return_value.run.return_value = {"start": 0, "iterations": 5, "checkpoint": "c", "curves": "k"}
        flow = TrainFgtFlow()
        flow.trainer_class = trainer
        with patch.object(pipeline_flows, "read_manifest", return_value={"clips": [{}]}):
            result = flow.run(self.context("train-fgt", resume=False, max_iterations=5))
        self.assertEqual(result["status"], "success")
        trainer.return_value.run.assert_called_once_with(resume=False, max_iterations=5)
        self.assertIn("Trained fgt to iteration 5", result["summary"])


class TestInferFlow(FlowTestCase):

    def test_invalid_flow_source(self):
        with self.assertLogs("inpaint_core.pipeline_flows", level="ERROR"):
            result = InferFlow().run(self.context("infer", flow_source="gt"))
        self.assertEqual(result["code"], "invalid_value")

    @patch.object(pipeline_flows, "load_lafc")
    @patch.object(pipeline_flows, "load_fgt")
    def test_auto_uses_clip_flows_without_lafc_checkpoint(self, load_fgt, load_lafc):
        context = self.context("infer", flow_source="auto")
        self.assertEqual(pipeline_flows._load_models(context)["flow_source"], "clip")
        load_lafc.assert_not_called()
        self.assertIsNone(context.params["lafc"])

    @patch.object(pipeline_flows, "load_lafc")
    @patch.object(pipeline_flows, "load_fgt")
    def test_auto_uses_lafc_when_checkpoint_exists(self, load_fgt, load_lafc):
        self.config.checkpoint_dir.mkdir(parents=True)
        (self.config.checkpoint_dir / "lafc.ckpt").write_bytes(b"")
        context = self.context("infer", flow_source="auto")
        self.assertEqual(pipeline_flows._load_models(context)["flow_source"], "lafc")
        load_lafc.assert_called_once_with(self.config)

    def test_external_frames_need_masks(self):
        context = self.context("infer", frames_dir=str(self.temp_dir))
        with self.assertRaises(pipeline_flows.DatasetError):
            pipeline_flows._select_clips(context)

    def test_failed_clip_fails_the_step(self):
        collection = ClipCollection.from_names(["clip_0000", "clip_0001"], root=self.temp_dir)
        context = self.context("infer", collection=collection, fgt=None, lafc=None,
                               clips={"clip_0000": MagicMock(), "clip_0001": MagicMock()})
        outcomes = [{"clip": "clip_0000"}, ShapeError("masks do not match frames")]
        with patch.object(pipeline_flows, "run_clip", side_effect=outcomes):
            with self.assertLogs("inpaint_core.pipeline_flows", level="ERROR"):
                result = pipeline_flows._inpaint(context)
        self.assertEqual(result["code"], "clip_failed")
        self.assertTrue(collection[0].is_completed)
        self.assertTrue(collection[1].is_failed)


class TestEvalFlow(FlowTestCase):

    def test_baseline_skipped_for_explicit_predictions(self):
        (self.temp_dir / "run" / "baseline").mkdir(parents=True)
        report = MagicMock(rows=[{}], aggregate={"psnr_hole": 31.25})
        with patch.object(pipeline_flows, "evaluate", return_value=report) as evaluate:
            result = EvalFlow().run(self.context("eval", pred_dir=str(self.temp_dir / "pred")))
        self.assertEqual(result["status"], "success")
        self.assertEqual(evaluate.call_count, 1)
        self.assertTrue(result["trace"][1]["skipped"])
        self.assertIn("31.25 dB", result["summary"])

    def test_baseline_evaluated_next_to_run(self):
        (self.temp_dir / "run" / "baseline").mkdir(parents=True)
        report = MagicMock(rows=[], aggregate={"psnr_hole": None})
        with patch.object(pipeline_flows, "evaluate", return_value=report) as evaluate:
            EvalFlow().run(self.context("eval"))
        self.assertEqual(evaluate.call_count, 2)
        self.assertEqual(Path(evaluate.call_args_list[1].args[2]), self.temp_dir / "run" / "eval_baseline")


class TestGradcheckFlow(FlowTestCase):

    def test_rows_written_to_csv(self):
        rows = [{"check": "op.conv2d", "max_rel_error": 1e-8, "passed": True}]
        with patch.object(pipeline_flows, "run_gradient_suite", return_value=rows):
            result = GradcheckFlow().run(self.context("gradcheck"))
        self.assertEqual(result["status"], "success")
        self.assertTrue((self.temp_dir / "run" / "gradcheck.csv").exists())
        self.assertEqual(result["summary"], "1/1 gradient checks passed")

    def test_failed_check(self):
        rows = [{"check": "op.conv2d", "max_rel_error": 0.2, "passed": False}]
        with patch.object(pipeline_flows, "run_gradient_suite", return_value=rows):
            result = GradcheckFlow().run(self.context("gradcheck"))
        self.assertEqual(result["code"], "gradcheck_failed")
        self.assertIn("op.conv2d", result["error"])


if __name__ == '__main__':
    unittest.main()
