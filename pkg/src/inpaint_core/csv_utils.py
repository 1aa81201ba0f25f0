"""
CSV utility functions for inpaint_core.

Writers for the fixed report schemas (loss curves, metrics, spectrum groups,
gradient checks) and an append-only curve writer that survives resumes.
"""
import csv
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

logger = logging.getLogger(__name__)

SCHEMAS: Dict[str, List[str]] = {
    "lafc_curves": ["iteration", "lr", "L_c", "L_v", "L_s", "L_w", "L_e", "L_F"],
    "fgt_curves": ["iteration", "lr", "L_yc", "L_yv", "L_adv", "L_amp", "L_y", "L_D"],
    "metrics": ["clip", "frames", "psnr_hole", "psnr_whole", "ssim", "epe_whole", "epe_hole"],
    "spectrum_groups": ["clip", "group", "count", "ratio", "l1"],
    "gradcheck": ["check", "max_rel_error", "passed"],
}

PathLike = Union[str, Path]


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_rows_csv(rows: Sequence[Dict[str, Any]], output_path: PathLike, schema: str) -> Path:
    """
    Write rows under one of the fixed schemas.

    Args:
        rows: Dictionaries keyed by the schema's columns
        output_path: Destination CSV
        schema: Key of SCHEMAS

    Raises:
        ValueError: Unknown schema, or a row missing a column / carrying an extra one
        IOError: If the file cannot be written
    """
    if schema not in SCHEMAS:
        raise ValueError(f"Unknown CSV schema '{schema}', expected one of {sorted(SCHEMAS)}")
    columns = SCHEMAS[schema]
    for row in rows:
        missing = [c for c in columns if c not in row]
        extra = [k for k in row if k not in columns]
        if missing or extra:
            raise ValueError(f"Row does not match schema '{schema}': missing={missing} extra={extra}")

    output_path = Path(output_path)
    try:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_format(row[c]) for c in columns])
    except OSError as e:
        logger.error(f"[CSV] Error writing {output_path}: {e}")
        raise IOError(f"Failed to write results to {output_path}: {e}")
    logger.info(f"[CSV] Wrote {len(rows)} rows to: {os.path.abspath(output_path)}")
    return output_path


def read_rows_csv(csv_path: PathLike) -> List[Dict[str, str]]:
    """
    Read a report CSV as a list of string dictionaries.

    Raises:
        FileNotFoundError: If the CSV file doesn't exist
    """
    if not os.path.exists(csv_path):
        logger.error(f"[CSV] File not found: {csv_path}")
        raise FileNotFoundError(f"CSV file not found: {csv_path}")
    with open(csv_path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


class CurveWriter:
    """Append-only loss-curve CSV.

    On resume the file is truncated to rows with ``iteration <= resume_iteration``
    so a resumed run produces the same file as an uninterrupted one.
    """

    def __init__(self, path: PathLike, schema: str, resume_iteration: int = -1):
        if schema not in SCHEMAS:
            raise ValueError(f"Unknown CSV schema '{schema}'")
        self.path = Path(path)
        self.columns = SCHEMAS[schema]
        self.path.parent.mkdir(parents=True, exist_ok=True)
        kept: List[List[str]] = []
        if resume_iteration >= 0 and self.path.exists():
            with open(self.path, newline="", encoding="utf-8") as f:
                reader = csv.reader(f)
                header = next(reader, None)
                if header == self.columns:
                    kept = [row for row in reader if row and int(row[0]) <= resume_iteration]
        with open(self.path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(self.columns)
            writer.writerows(kept)
        if kept:
            logger.info(f"[CSV] Resumed {self.path.name} with {len(kept)} rows")

    def append(self, row: Dict[str, Any]) -> None:
        with open(self.path, "a", newline="", encoding="utf-8") as f:
            csv.writer(f, lineterminator="\n").writerow([_format(row[c]) for c in self.columns])

    def extend(self, rows: Iterable[Dict[str, Any]]) -> None:
        for row in rows:
            self.append(row)
