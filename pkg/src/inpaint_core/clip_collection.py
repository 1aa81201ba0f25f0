"""
Clip collection management.

Tracks per-clip processing status for batch commands (inference, evaluation)
and turns finished items into result rows.
"""
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional


class ClipStatus(str, Enum):
    """Clip processing status."""
    PENDING = "pending"
    PROCESSING = "processing"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class ClipItem:
    """
    Individual clip with status tracking.

    Attributes:
        name: Clip directory name (e.g. ``clip_0003``)
        path: Clip directory
        status: Current processing status
        result: Result row (if completed)
        error: Error message (if failed)
    """
    name: str
    path: Optional[Path] = None
    status: ClipStatus = ClipStatus.PENDING
    result: Optional[Dict[str, Any]] = None
    error: Optional[str] = None

    def mark_processing(self) -> None:
        self.status = ClipStatus.PROCESSING

    def mark_completed(self, result: Dict[str, Any]) -> None:
        self.status = ClipStatus.COMPLETED
        self.result = result
        self.error = None

    def mark_failed(self, error: str) -> None:
        self.status = ClipStatus.FAILED
        self.error = error
        self.result = None

    def reset(self) -> None:
        self.status = ClipStatus.PENDING
        self.result = None
        self.error = None

    @property
    def is_pending(self) -> bool:
        return self.status == ClipStatus.PENDING

    @property
    def is_completed(self) -> bool:
        return self.status == ClipStatus.COMPLETED

    @property
    def is_failed(self) -> bool:
        return self.status == ClipStatus.FAILED


class ClipCollection:
    """
    Ordered collection of clips with progress tracking.

    Example:
        >>> collection = ClipCollection.from_directory(Path("runs/desk/data/heldout"))
        >>> for item in collection:
        ...     item.mark_processing()
        ...     item.mark_completed({"clip": item.name, "psnr_hole": 31.2})
        >>> collection.progress_percentage
        100.0
    """

    def __init__(self):
        self._items: List[ClipItem] = []

    @classmethod
    def from_names(cls, names: List[str], root: Optional[Path] = None) -> "ClipCollection":
        collection = cls()
        for name in names:
            collection.add(name, Path(root) / name if root is not None else None)
        return collection

    @classmethod
    def from_directory(cls, root: Path) -> "ClipCollection":
        """Every sub-directory of ``root``, sorted by name."""
        root = Path(root)
        names = sorted(p.name for p in root.iterdir() if p.is_dir()) if root.is_dir() else []
        return cls.from_names(names, root)

    def add(self, name: str, path: Optional[Path] = None) -> ClipItem:
        item = ClipItem(name=name, path=path)
        self._items.append(item)
        return item

    def find(self, name: str) -> Optional[ClipItem]:
        for item in self._items:
            if item.name == name:
                return item
        return None

    def get_pending(self) -> List[ClipItem]:
        return [item for item in self._items if item.is_pending]

    def get_completed(self) -> List[ClipItem]:
        return [item for item in self._items if item.is_completed]

    def get_failed(self) -> List[ClipItem]:
        return [item for item in self._items if item.is_failed]

    def to_results_list(self) -> List[Dict[str, Any]]:
        """Result rows of completed clips, in collection order."""
        return [dict(item.result) for item in self._items if item.is_completed and item.result]

    @property
    def progress_percentage(self) -> float:
        if not self._items:
            return 0.0
        done = sum(1 for item in self._items if item.is_completed or item.is_failed)
        return 100.0 * done / len(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[ClipItem]:
        return iter(self._items)

    def __getitem__(self, index: int) -> ClipItem:
        return self._items[index]

    def __repr__(self) -> str:
        return (f"ClipCollection(total={len(self)}, completed={len(self.get_completed())}, "
                f"failed={len(self.get_failed())})")
