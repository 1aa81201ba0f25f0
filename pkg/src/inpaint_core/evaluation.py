"""
Evaluation of inpainted clips against ground truth.

Writes metrics.csv (one row per clip plus a ``__mean__`` row), summary.txt,
flow-color renderings of completed flows and the amplitude-spectrum group
table with its group images.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from .clip_collection import ClipCollection, ClipItem
from .csv_utils import read_rows_csv, write_rows_csv
from .errors import DatasetError, EmptyRegionError, InpaintError, ShapeError
from .flow_io import flow_to_color, list_frame_files, load_frame_dir, load_mask_dir, read_flo_file, save_image
from .metrics import metric_epe, metric_psnr, metric_ssim
from .objectives import frame_amplitude, spectrum_group_analysis

logger = logging.getLogger(__name__)

MEAN_ROW = "__mean__"
METRIC_COLUMNS = ("psnr_hole", "psnr_whole", "ssim", "epe_whole", "epe_hole")

PathLike = Union[str, Path]


@dataclass
class MetricsReport:
    """Per-clip rows, their aggregate and the artifacts written alongside.

    The aggregate of each metric is the mean over the clips that define it;
    ``frames`` aggregates as a total.
    """
    rows: List[Dict[str, Any]]
    aggregate: Dict[str, Any]
    spectrum_rows: List[Dict[str, Any]] = field(default_factory=list)
    curves: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    artifacts: Dict[str, List[str]] = field(default_factory=dict)
    failed: Dict[str, str] = field(default_factory=dict)

    def summary_text(self) -> str:
        lines = [f"clips evaluated: {len(self.rows)}"]
        if self.failed:
            lines.append(f"clips failed: {len(self.failed)} ({', '.join(sorted(self.failed))})")
        for column in METRIC_COLUMNS:
            value = self.aggregate.get(column)
            lines.append(f"{column:>10}: " + ("n/a" if value is None else f"{value:.4f}"))
        for name, curve in sorted(self.curves.items()):
            lines.append(f"{name}: {curve['column']} {curve['first']:.4f} -> {curve['last']:.4f} "
                         f"over {curve['rows']} iterations")
        return "\n".join(lines) + "\n"


def aggregate_rows(rows: List[Dict[str, Any]]) -> Dict[str, Any]:
    """``__mean__`` row: mean of every metric column over rows where it is defined."""
    out: Dict[str, Any] = {"clip": MEAN_ROW, "frames": sum(int(r["frames"]) for r in rows)}
    for column in METRIC_COLUMNS:
        values = [r[column] for r in rows if r.get(column) is not None]
        out[column] = float(np.mean(values)) if values else None
    return out


def _optional(fn, *args) -> Optional[float]:
    try:
        return fn(*args)
    except EmptyRegionError:
        return None


def _flow_files(directory: Path, tag: str) -> List[Path]:
    return sorted(directory.glob(f"{tag}_*.flo")) if directory.is_dir() else []


def clip_flow_epe(pred_dir: Path, gt_dir: Path, masks: np.ndarray) -> Dict[str, Optional[float]]:
    """Whole-field and hole EPE of completed forward flows, averaged over flows.

    A forward flow t -> t+1 is corrupted where frame t is masked.
    """
    pred_files = _flow_files(pred_dir, "fwd")
    if not pred_files:
        return {"epe_whole": None, "epe_hole": None}
    whole, hole = [], []
    for path in pred_files:
        gt_path = gt_dir / path.name
        if not gt_path.exists():
            raise DatasetError(f"missing ground-truth flow for {path.name}: {gt_path}")
        t = int(path.stem.split("_")[1])
        pred, gt = read_flo_file(path), read_flo_file(gt_path)
        whole.append(metric_epe(pred, gt))
        value = _optional(metric_epe, pred, gt, masks[t])
        if value is not None:
            hole.append(value)
    return {"epe_whole": float(np.mean(whole)), "epe_hole": float(np.mean(hole)) if hole else None}


def evaluate_clip(pred_dir: Path, gt_dir: Path, masks_dir: Optional[Path] = None) -> Dict[str, Any]:
    """Metrics row for one clip.

    Raises:
        DatasetError: prediction or ground-truth frames are missing
        ShapeError: frame counts or extents disagree
    """
    pred_frames = load_frame_dir(pred_dir / "frames")
    gt_frames = load_frame_dir(gt_dir / "frames")
    masks = load_mask_dir(masks_dir or gt_dir / "masks")
    if pred_frames.shape != gt_frames.shape:
        raise ShapeError(f"{gt_dir.name}: prediction {pred_frames.shape} vs ground truth {gt_frames.shape}")
    if masks.shape != gt_frames.shape[:3]:
        raise ShapeError(f"{gt_dir.name}: masks {masks.shape} vs frames {gt_frames.shape}")
    row: Dict[str, Any] = {
        "clip": gt_dir.name,
        "frames": int(gt_frames.shape[0]),
        "psnr_hole": _optional(metric_psnr, pred_frames, gt_frames, masks),
        "psnr_whole": metric_psnr(pred_frames, gt_frames),
        "ssim": float(np.mean([metric_ssim(p, g) for p, g in zip(pred_frames, gt_frames)])),
    }
    row.update(clip_flow_epe(pred_dir / "flows", gt_dir / "flows", masks))
    return row


def spectrum_rows(pred_dir: Path, gt_dir: Path, image_dir: Optional[Path] = None) -> List[Dict[str, Any]]:
    """Amplitude-group table for the middle frame of a clip (ground truth binned, prediction compared)."""
    gt_files = list_frame_files(gt_dir / "frames")
    middle = gt_files[len(gt_files) // 2].name
    gt = load_frame_dir(gt_dir / "frames")[len(gt_files) // 2]
    pred = load_frame_dir(pred_dir / "frames")[len(gt_files) // 2]
    groups = spectrum_group_analysis(frame_amplitude(gt), frame_amplitude(pred))
    if image_dir is not None:
        save_image(Path(image_dir) / f"{gt_dir.name}_{middle}", groups.group_image())
    return [{"clip": gt_dir.name, "group": g, "count": groups.counts[g], "ratio": groups.ratios[g],
             "l1": groups.l1[g]} for g in sorted(groups.counts)]


def render_flow_colors(pred_dir: Path, out_dir: Path) -> List[Path]:
    """Flow-color PNG per completed flow, all normalized by the clip's largest magnitude."""
    files = _flow_files(pred_dir, "fwd") + _flow_files(pred_dir, "bwd")
    if not files:
        return []
    flows = [read_flo_file(p) for p in files]
    radius = max(float(np.sqrt((f.uv.astype(np.float64) ** 2).sum(-1)).max()) for f in flows)
    return [save_image(Path(out_dir) / f"{p.stem}.png", flow_to_color(f, max_radius=radius))
            for p, f in zip(files, flows)]


def curve_summary(path: PathLike, column: str, window: int = 50) -> Dict[str, Any]:
    """Mean of ``column`` over the first and last ``window`` rows of a loss-curve CSV."""
    rows = read_rows_csv(path)
    if not rows:
        raise DatasetError(f"loss curve is empty: {path}")
    values = np.array([float(r[column]) for r in rows])
    span = min(window, len(values))
    return {"column": column, "rows": len(values), "first": float(values[:span].mean()),
            "last": float(values[-span:].mean())}


def evaluate(pred_root: PathLike, gt_root: PathLike, out_dir: PathLike,
             curves: Optional[Dict[str, PathLike]] = None) -> MetricsReport:
    """Evaluate every clip directory of ``gt_root`` against ``pred_root``.

    Args:
        pred_root: Directory with one ``<clip>/frames`` (and optionally ``<clip>/flows``) per clip
        gt_root: Dataset split directory with ``<clip>/frames``, ``masks`` and ``flows``
        out_dir: Report directory
        curves: Optional loss-curve CSVs to summarize, keyed by network name

    Raises:
        DatasetError: ``gt_root`` has no clips, or a prediction is missing
    """
    pred_root, gt_root, out_dir = Path(pred_root), Path(gt_root), Path(out_dir)
    collection = ClipCollection.from_directory(gt_root)
    if not len(collection):
        raise DatasetError(f"no clips to evaluate under {gt_root}")
    missing = [item.name for item in collection if not (pred_root / item.name / "frames").is_dir()]
    if missing:
        raise DatasetError(f"missing predictions for {len(missing)} clips: {', '.join(missing[:5])}")

    artifacts: Dict[str, List[str]] = {"flow_color": [], "spectrum": [str(out_dir / "spectrum")]}
    spectrum: List[Dict[str, Any]] = []
    for item in collection:
        _evaluate_item(item, pred_root, out_dir, artifacts, spectrum)
        logger.info(f"[EVAL] {item.name}: {item.status.value} ({collection.progress_percentage:.0f}%)")

    rows = collection.to_results_list()
    if not rows:
        first = collection.get_failed()[0]
        raise DatasetError(f"every clip failed to evaluate, first: {first.name}: {first.error}")
    report = MetricsReport(rows=rows, aggregate=aggregate_rows(rows), spectrum_rows=spectrum,
                           artifacts=artifacts,
                           failed={item.name: item.error for item in collection.get_failed()})
    for name, path in (curves or {}).items():
        if Path(path).exists():
            column = "L_F" if name == "lafc" else "L_y"
            report.curves[name] = curve_summary(path, column)

    write_rows_csv(rows + [report.aggregate], out_dir / "metrics.csv", "metrics")
    if spectrum:
        write_rows_csv(spectrum, out_dir / "spectrum_groups.csv", "spectrum_groups")
    (out_dir / "summary.txt").write_text(report.summary_text(), encoding="utf-8")
    logger.info(f"[EVAL] {collection}")
    return report


def _evaluate_item(item: ClipItem, pred_root: Path, out_dir: Path, artifacts: Dict[str, List[str]],
                   spectrum: List[Dict[str, Any]]) -> None:
    item.mark_processing()
    pred_dir = pred_root / item.name
    try:
        row = evaluate_clip(pred_dir, item.path)
        spectrum.extend(spectrum_rows(pred_dir, item.path, out_dir / "spectrum"))
        colors = render_flow_colors(pred_dir / "flows", out_dir / "flow_color" / item.name)
        artifacts["flow_color"].extend(str(p) for p in colors)
    except InpaintError as e:
        logger.error(f"[EVAL] {item.name} failed: {e}")
        item.mark_failed(str(e))
        return
    item.mark_completed(row)
