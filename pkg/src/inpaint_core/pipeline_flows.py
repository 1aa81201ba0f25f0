"""
Pipeline command flows.

One Workflow per CLI subcommand. Each flow plans its steps, runs them in
order with banner logging and turns the first library failure into an
error status dict::

    {"status": "error", "error": "...", "code": "bad_dataset", "summary": "...", "trace": [...]}
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

from .clip_collection import ClipCollection
from .csv_utils import write_rows_csv
from .datasets import generate_dataset, load_clip, load_external_clip, read_manifest, spot_check, verify_manifest
from .errors import DatasetError, InpaintError
from .evaluation import evaluate
from .gradient_suite import run_gradient_suite
from .inference import run_clip
from .training import FgtTrainer, LafcTrainer, LAFC_CHECKPOINT, load_fgt, load_lafc
from .workflow import FlowContext, Workflow, WorkflowStep

logger = logging.getLogger(__name__)

RESOLVED_CONFIG = "config.ini"


@dataclass
class _Step(WorkflowStep):
    _name: str
    _fn: Any

    def name(self) -> str:
        return self._name

    def execute(self, context: FlowContext) -> Dict[str, Any]:
        return self._fn(context)


def error_code(error: Exception) -> str:
    if isinstance(error, InpaintError):
        return error.code
    if isinstance(error, OSError):
        return "io_error"
    return "invalid_value"


class CommandFlow(Workflow):
    """Shared banner/trace/error handling; subclasses supply ``id``, ``title`` and ``plan``."""

    title = ""

    def id(self) -> str:
        raise NotImplementedError

    def plan(self, context: FlowContext) -> List[WorkflowStep]:
        raise NotImplementedError

    def summarize(self, context: FlowContext) -> str:
        return f"{self.title} finished"

    def run(self, context: FlowContext) -> Dict[str, Any]:
        log = context.logger or logger
        log.info("=" * 60)
        log.info(f"{self.title} (seed {context.config.seed}, out {context.config.out_dir})")
        log.info("=" * 60)
        results: List[Dict[str, Any]] = []
        for number, step in enumerate(self.plan(context), start=1):
            log.info(f"STEP {number}: {step.name()}")
            try:
                res = step.execute(context)
            except (InpaintError, OSError, ValueError) as e:
                log.error(f"[WORKFLOW] {self.id()} failed at {step.name()}: {e}")
                results.append({"step": step.name(), "status": "error", "error": str(e)})
                return {"status": "error", "error": str(e), "code": error_code(e),
                        "summary": f"{self.title} failed at step '{step.name()}'", "trace": results}
            results.append({"step": step.name(), **res})
            if res.get("status") != "ok":
                return {"status": "error", "error": res.get("error", step.name()),
                        "code": res.get("code", "step_failed"),
                        "summary": f"{self.title} failed at step '{step.name()}'", "trace": results}
        summary = self.summarize(context)
        log.info("=" * 60)
        log.info(summary)
        log.info("=" * 60)
        return {"status": "success", "summary": summary, "trace": results}


def _save_config(context: FlowContext) -> Dict[str, Any]:
    path = context.config.save(context.config.out_path / RESOLVED_CONFIG)
    return {"status": "ok", "config": str(path)}


def _require_dataset(context: FlowContext) -> Dict[str, Any]:
    manifest = read_manifest(context.config.data_dir)
    return {"status": "ok", "clips": len(manifest["clips"])}


# ------------------------------------------------------------------ gen-data
class GenDataFlow(CommandFlow):
    """Render the synthetic dataset, then check it."""

    title = "Generate synthetic dataset"

    def id(self) -> str:
        return "gen-data"

    def plan(self, context: FlowContext) -> List[WorkflowStep]:
        return [
            _Step("save_config", _save_config),
            _Step("generate", _generate),
            _Step("warp_spot_check", _spot_check),
            _Step("verify_manifest", _verify),
        ]

    def summarize(self, context: FlowContext) -> str:
        return f"Wrote {context.params.get('clips', 0)} clips to {context.config.data_dir}"


def _generate(context: FlowContext) -> Dict[str, Any]:
    manifest = generate_dataset(context.config, force=bool(context.params.get("force")))
    context.params["clips"] = len(manifest["clips"])
    return {"status": "ok", "clips": len(manifest["clips"])}


def _spot_check(context: FlowContext) -> Dict[str, Any]:
    errors = spot_check(context.config.data_dir, seed=context.config.seed)
    return {"status": "ok", "warp_errors": errors}


def _verify(context: FlowContext) -> Dict[str, Any]:
    mismatched = verify_manifest(context.config.data_dir)
    if mismatched:
        return {"status": "error", "code": DatasetError.code,
                "error": f"{len(mismatched)} files do not match the manifest, first: {mismatched[0]}"}
    return {"status": "ok"}


# -------------------------------------------------------------- train-*
class _TrainFlow(CommandFlow):
    trainer_class: Any = None

    def plan(self, context: FlowContext) -> List[WorkflowStep]:
        return [
            _Step("save_config", _save_config),
            _Step("require_dataset", _require_dataset),
            _Step("train", self._train),
        ]

    def _train(self, context: FlowContext) -> Dict[str, Any]:
        trainer = self.trainer_class(context.config)
        result = trainer.run(resume=bool(context.params.get("resume", True)),
                             max_iterations=context.params.get("max_iterations"))
        context.params["training"] = result
        return {"status": "ok", **{k: result[k] for k in ("start", "iterations", "checkpoint", "curves")}}

    def summarize(self, context: FlowContext) -> str:
        result = context.params.get("training", {})
        return f"Trained {self.id()[len('train-'):]} to iteration {result.get('iterations')} -> {result.get('checkpoint')}"


class TrainLafcFlow(_TrainFlow):
    """Train the flow-completion network."""

    title = "Train flow completion"
    trainer_class = LafcTrainer

    def id(self) -> str:
        return "train-lafc"


class TrainFgtFlow(_TrainFlow):
    """Train the flow-guided transformer against the patch discriminator."""

    title = "Train flow-guided transformer"
    trainer_class = FgtTrainer

    def id(self) -> str:
        return "train-fgt"


# --------------------------------------------------------------------- infer
class InferFlow(CommandFlow):
    """Inpaint held-out clips (or one external clip) with the trained networks.

    ``context.params`` keys:
      - frames_dir / masks_dir / flows_dir: external clip (flows optional)
      - flow_source: ``auto`` (LAFC when its checkpoint exists), ``lafc`` or ``clip``
      - split: dataset split to process (default ``heldout``)
    """

    title = "Sliding-window inference"

    def id(self) -> str:
        return "infer"

    def plan(self, context: FlowContext) -> List[WorkflowStep]:
        return [
            _Step("load_models", _load_models),
            _Step("select_clips", _select_clips),
            _Step("inpaint", _inpaint),
        ]

    def summarize(self, context: FlowContext) -> str:
        collection = context.params.get("collection")
        return f"Inpainted {len(collection.get_completed()) if collection else 0} clips -> {_infer_root(context)}"


def _infer_root(context: FlowContext) -> Path:
    return context.config.out_path / "infer"


def _load_models(context: FlowContext) -> Dict[str, Any]:
    config = context.config
    source = context.params.get("flow_source", "auto")
    if source not in ("auto", "lafc", "clip"):
        raise ValueError(f"flow_source must be auto, lafc or clip, got {source!r}")
    context.params["fgt"] = load_fgt(config)
    use_lafc = source == "lafc" or (source == "auto" and (config.checkpoint_dir / LAFC_CHECKPOINT).exists())
    context.params["lafc"] = load_lafc(config) if use_lafc else None
    return {"status": "ok", "flow_source": "lafc" if use_lafc else "clip"}


def _select_clips(context: FlowContext) -> Dict[str, Any]:
    params = context.params
    if params.get("frames_dir"):
        if not params.get("masks_dir"):
            raise DatasetError("--frames needs a matching --masks directory")
        clip = load_external_clip(params["frames_dir"], params["masks_dir"], params.get("flows_dir"))
        collection = ClipCollection.from_names([clip.name])
        params["clips"] = {clip.name: clip}
    else:
        root = context.config.data_dir / params.get("split", "heldout")
        collection = ClipCollection.from_directory(root)
        if not len(collection):
            raise DatasetError(f"no clips to inpaint under {root}")
        params["clips"] = {}
    params["collection"] = collection
    return {"status": "ok", "clips": len(collection)}


def _inpaint(context: FlowContext) -> Dict[str, Any]:
    params = context.params
    collection: ClipCollection = params["collection"]
    root = _infer_root(context)
    baseline = context.config.out_path / "baseline"
    for item in collection.get_pending():
        item.mark_processing()
        try:
            clip = params["clips"].get(item.name) or load_clip(item.path)
            item.mark_completed(run_clip(clip, params["fgt"], params["lafc"], root / item.name,
                                         baseline / item.name))
        except InpaintError as e:
            logger.error(f"[INFER] {item.name} failed: {e}")
            item.mark_failed(str(e))
    failed = collection.get_failed()
    if failed:
        return {"status": "error", "code": "clip_failed",
                "error": f"{len(failed)} of {len(collection)} clips failed, first {failed[0].name}: {failed[0].error}"}
    return {"status": "ok", "clips": len(collection)}


# ---------------------------------------------------------------------- eval
class EvalFlow(CommandFlow):
    """Metrics for inpainted clips and for the Laplacian-fill baseline.

    ``context.params`` keys ``pred_dir`` / ``gt_dir`` override the run's
    ``infer`` directory and held-out split.
    """

    title = "Evaluate"

    def id(self) -> str:
        return "eval"

    def plan(self, context: FlowContext) -> List[WorkflowStep]:
        return [
            _Step("evaluate", _evaluate),
            _Step("evaluate_baseline", _evaluate_baseline),
        ]

    def summarize(self, context: FlowContext) -> str:
        report = context.params.get("report")
        if report is None:
            return "No report"
        psnr = report.aggregate.get("psnr_hole")
        return f"Evaluated {len(report.rows)} clips, mean hole PSNR " + ("n/a" if psnr is None else f"{psnr:.2f} dB")


def _gt_root(context: FlowContext) -> Path:
    return Path(context.params.get("gt_dir") or context.config.data_dir / "heldout")


def _evaluate(context: FlowContext) -> Dict[str, Any]:
    out = context.config.out_path
    pred = Path(context.params.get("pred_dir") or out / "infer")
    curves = {"lafc": out / "lafc_curves.csv", "fgt": out / "fgt_curves.csv"}
    report = evaluate(pred, _gt_root(context), out / "eval", curves=curves)
    context.params["report"] = report
    return {"status": "ok", "aggregate": report.aggregate}


def _evaluate_baseline(context: FlowContext) -> Dict[str, Any]:
    baseline = context.config.out_path / "baseline"
    if context.params.get("pred_dir") or not baseline.is_dir():
        return {"status": "ok", "skipped": True}
    report = evaluate(baseline, _gt_root(context), context.config.out_path / "eval_baseline")
    context.params["baseline_report"] = report
    return {"status": "ok", "aggregate": report.aggregate}


# ----------------------------------------------------------------- gradcheck
class GradcheckFlow(CommandFlow):
    """Finite-difference check of every differentiable operation and loss."""

    title = "Gradient check suite"

    def id(self) -> str:
        return "gradcheck"

    def plan(self, context: FlowContext) -> List[WorkflowStep]:
        return [_Step("run_suite", _run_suite)]

    def summarize(self, context: FlowContext) -> str:
        rows = context.params.get("gradcheck", [])
        return f"{sum(r['passed'] for r in rows)}/{len(rows)} gradient checks passed"


def _run_suite(context: FlowContext) -> Dict[str, Any]:
    rows = run_gradient_suite(seed=context.config.seed)
    context.params["gradcheck"] = rows
    path = write_rows_csv(rows, context.config.out_path / "gradcheck.csv", "gradcheck")
    failed = [r["check"] for r in rows if not r["passed"]]
    if failed:
        return {"status": "error", "code": "gradcheck_failed", "error": f"checks failed: {', '.join(failed)}"}
    return {"status": "ok", "csv": str(path)}


FLOWS: Dict[str, type] = {
    "gen-data": GenDataFlow,
    "train-lafc": TrainLafcFlow,
    "train-fgt": TrainFgtFlow,
    "infer": InferFlow,
    "eval": EvalFlow,
    "gradcheck": GradcheckFlow,
}


def flow_for(command: str) -> Optional[CommandFlow]:
    kind = FLOWS.get(command)
    return kind() if kind is not None else None
