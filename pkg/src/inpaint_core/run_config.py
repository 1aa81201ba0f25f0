"""
Run configuration: everything a command needs, assembled from an INI file.

Sections mirror the dataclasses below ([data] -> DataSpec, [lafc] ->
LafcConfig, [fgt] -> FgtConfig, [loss] -> LossWeights, [schedule] ->
Schedule) plus [run] (seed, out_dir) and [logging]. A run is reproducible
from the serialized sections and the seed alone.
"""
from __future__ import annotations

import dataclasses
import hashlib
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type, Union

from .errors import ConfigError
from .ini_configuration import IniConfiguration, format_value
from .lafc import LafcConfig
from .objectives import LossWeights
from .transformer import FgtConfig

logger = logging.getLogger(__name__)

LAFC_FULL_ITERATIONS = 280000
LAFC_FULL_MILESTONE = 120000
FGT_FULL_ITERATIONS = 500000
FGT_FULL_MILESTONE = 400000


@dataclass
class DataSpec:
    """Synthetic dataset parameters (or an external directory in the same layout)."""
    clips: int = 200
    heldout: int = 20
    frames: int = 20
    height: int = 64
    width: int = 112
    num_sprites: int = 2
    max_speed: int = 2
    integer_velocity: bool = True
    mask_kinds: Tuple[str, ...] = ("square_static", "square_drift", "object")
    mask_max_step: int = 2
    external_dir: str = ""


@dataclass
class Schedule:
    """Iteration budgets, learning-rate milestones and bookkeeping cadence."""
    lafc_iterations: int = 2000
    lafc_milestone: int = 857
    fgt_iterations: int = 5000
    fgt_milestone: int = 4000
    lr: float = 1e-4
    batch_size: int = 1
    checkpoint_every: int = 500
    log_every: int = 50
    disc_channels: int = 16

    def scaled(self, factor: float) -> "Schedule":
        """Full-length schedule times ``factor`` (one factor for all four numbers)."""
        if factor <= 0:
            raise ConfigError(f"scale factor must be positive, got {factor}")
        return dataclasses.replace(
            self,
            lafc_iterations=max(1, round(LAFC_FULL_ITERATIONS * factor)),
            lafc_milestone=round(LAFC_FULL_MILESTONE * factor),
            fgt_iterations=max(1, round(FGT_FULL_ITERATIONS * factor)),
            fgt_milestone=round(FGT_FULL_MILESTONE * factor),
        )


def _desk_fgt() -> FgtConfig:
    return FgtConfig(global_interval=5, encoder_channels=32)


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "runs/desk"
    data: DataSpec = field(default_factory=DataSpec)
    lafc: LafcConfig = field(default_factory=LafcConfig)
    fgt: FgtConfig = field(default_factory=_desk_fgt)
    loss: LossWeights = field(default_factory=LossWeights)
    schedule: Schedule = field(default_factory=Schedule)
    logging: Dict[str, Any] = field(default_factory=lambda: {"level": "INFO"})

    # ------------------------------------------------------------ paths
    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)

    @property
    def data_dir(self) -> Path:
        return Path(self.data.external_dir) if self.data.external_dir else self.out_path / "data"

    @property
    def checkpoint_dir(self) -> Path:
        return self.out_path / "checkpoints"

    # ---------------------------------------------------- serialization
    def to_sections(self) -> Dict[str, Dict[str, Any]]:
        return {
            "run": {"seed": self.seed, "out_dir": self.out_dir},
            "data": dataclasses.asdict(self.data),
            "lafc": dataclasses.asdict(self.lafc),
            "fgt": dataclasses.asdict(self.fgt),
            "loss": dataclasses.asdict(self.loss),
            "schedule": dataclasses.asdict(self.schedule),
            "logging": dict(self.logging),
        }

    def to_ini(self) -> str:
        out = io.StringIO()
        for section, values in self.to_sections().items():
            out.write(f"[{section}]\n")
            for key, value in values.items():
                out.write(f"{key} = {format_value(value)}\n")
            out.write("\n")
        return out.getvalue()

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_ini().encode("utf-8")).hexdigest()

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_ini(), encoding="utf-8")
        return path

    @classmethod
    def from_sections(cls, sections: Dict[str, Dict[str, Any]]) -> "RunConfig":
        """Build from coerced INI sections; unknown sections or keys raise ConfigError."""
        known = {"run", "data", "lafc", "fgt", "loss", "schedule", "logging"}
        unknown = sorted(set(sections) - known)
        if unknown:
            raise ConfigError(f"unknown config sections: {unknown}")
        run = dict(sections.get("run", {}))
        extra = sorted(set(run) - {"seed", "out_dir"})
        if extra:
            raise ConfigError(f"unknown keys in [run]: {extra}")
        config = cls(
            seed=int(run.get("seed", 0)),
            out_dir=str(run.get("out_dir", "runs/desk")),
            data=_build(DataSpec, sections.get("data", {}), "data"),
            lafc=_build(LafcConfig, sections.get("lafc", {}), "lafc"),
            fgt=_build(FgtConfig, sections.get("fgt", {}), "fgt", base=_desk_fgt()),
            loss=_build(LossWeights, sections.get("loss", {}), "loss"),
            schedule=_build(Schedule, sections.get("schedule", {}), "schedule"),
            logging=dict(sections.get("logging", {"level": "INFO"})),
        )
        config.fgt.validate()
        return config

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None) -> "RunConfig":
        """Read and validate an INI file (``desk.ini.local`` / ``desk.ini`` when no path is given).

        Raises:
            ConfigError: validation errors or unknown keys
            FileNotFoundError: explicit path missing
        """
        ini = IniConfiguration(path)
        result = ini.validate()
        for warning in result["warnings"]:
            logger.warning(f"[CONFIG] {warning}")
        if result["status"] != "valid":
            raise ConfigError("; ".join(result["errors"]))
        sections = ini.get_all()
        if not sections:
            logger.info("[CONFIG] No configuration file found, using desk defaults")
        return cls.from_sections(sections)

    def with_overrides(self, seed: Optional[int] = None, out_dir: Optional[str] = None,
                       scale: Optional[float] = None) -> "RunConfig":
        config = dataclasses.replace(self)
        if seed is not None:
            config.seed = int(seed)
        if out_dir is not None:
            config.out_dir = str(out_dir)
        if scale is not None:
            config.schedule = self.schedule.scaled(scale)
            logger.info(f"[CONFIG] Scale {scale}: lafc {config.schedule.lafc_iterations}/"
                        f"{config.schedule.lafc_milestone}, fgt {config.schedule.fgt_iterations}/"
                        f"{config.schedule.fgt_milestone}")
        return config


def _build(kind: Type, values: Dict[str, Any], section: str, base=None):
    names = {f.name: f for f in dataclasses.fields(kind)}
    extra = sorted(set(values) - set(names))
    if extra:
        raise ConfigError(f"unknown keys in [{section}]: {extra}")
    kwargs = {}
    for key, value in values.items():
        default = getattr(base, key) if base is not None else names[key].default
        if isinstance(default, tuple) and not isinstance(value, tuple):
            value = (value,) if value != "" else ()
        elif isinstance(default, bool):
            value = bool(value)
        elif isinstance(default, float) and isinstance(value, int):
            value = float(value)
        elif isinstance(default, str):
            value = "" if value is None else str(value)
        kwargs[key] = value
    try:
        return dataclasses.replace(base, **kwargs) if base is not None else kind(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid [{section}] values: {e}") from e
