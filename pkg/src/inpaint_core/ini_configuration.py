"""
INI Configuration implementation for inpaint_core.

Implements the Configuration protocol with configparser: flat UTF-8
``key = value`` lines under ``[section]`` headers. Values are coerced on
load (bool words, int, float, comma-separated tuples, else string).
"""
import configparser
import logging
from pathlib import Path
from typing import Dict, Any, List, Union, Optional

from .configuration import Configuration, Sections

logger = logging.getLogger(__name__)

DEFAULT_FILES = ('desk.ini.local', 'desk.ini')
KNOWN_MASK_KINDS = ('square_static', 'square_drift', 'object')
HINGE_MODES = ('conventional', 'verbatim')

_TRUE = ('true', 'yes', 'on')
_FALSE = ('false', 'no', 'off')


def convert_value(value: str) -> Any:
    """Coerce one INI string; ``0``/``1`` stay integers."""
    text = value.strip()
    if text.lower() in _TRUE:
        return True
    if text.lower() in _FALSE:
        return False

    try:
        return int(text)
    except ValueError:
        pass

    try:
        return float(text)
    except ValueError:
        pass

    if ',' in text:
        return tuple(convert_value(part) for part in text.split(',') if part.strip())

    return text


def format_value(value: Any) -> str:
    """Inverse of convert_value for the types it produces."""
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (tuple, list)):
        return ', '.join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


class IniConfiguration(Configuration):
    """Configuration implementation using INI files with configparser."""

    def __init__(self, config_path: Optional[Union[str, Path]] = None):
        """
        Args:
            config_path: Optional path to an INI file. If not provided,
                        desk.ini.local then desk.ini are tried in the working directory
        """
        self.config_path = Path(config_path) if config_path else None
        self.config = configparser.ConfigParser(interpolation=None)
        self._data: Sections = {}

        if config_path is None:
            self._load_default_config()
        else:
            self.load(config_path)

    def _load_default_config(self):
        for filename in DEFAULT_FILES:
            if Path(filename).exists():
                self.load(filename)
                break

    def load(self, file_path: Union[str, Path]) -> Sections:
        """
        Load configuration from an INI file.

        Returns:
            Dictionary of sections with coerced values

        Raises:
            FileNotFoundError: If the configuration file doesn't exist
            configparser.Error: If the INI file is malformed
        """
        file_path = Path(file_path)

        if not file_path.exists():
            raise FileNotFoundError(f"Configuration file not found: {file_path}")

        self.config.clear()
        self.config.read(file_path, encoding='utf-8')
        self.config_path = file_path

        self._data = {}
        for section_name in self.config.sections():
            self._data[section_name] = {
                key: convert_value(value) for key, value in self.config.items(section_name)
            }
        logger.info(f"[CONFIG] Loaded {len(self._data)} sections from: {file_path}")
        return self.get_all()

    def load_dict(self, sections: Sections) -> Sections:
        """Replace the current data with already-coerced sections."""
        self._data = {name: dict(values) for name, values in sections.items()}
        return self.get_all()

    def save(self, config: Optional[Sections], destination: Union[str, Path]) -> bool:
        """
        Save sections to an INI file (keys in insertion order).

        Returns:
            bool: True if save successful, False otherwise
        """
        try:
            destination = Path(destination)
            destination.parent.mkdir(parents=True, exist_ok=True)
            output_config = configparser.ConfigParser(interpolation=None)

            for section_name, section_data in (config if config is not None else self._data).items():
                output_config.add_section(section_name)
                for key, value in section_data.items():
                    output_config.set(section_name, key, format_value(value))

            with open(destination, 'w', encoding='utf-8') as configfile:
                output_config.write(configfile)
            return True

        except (OSError, configparser.Error) as e:
            logger.error(f"[CONFIG] Failed to save configuration to {destination}: {e}")
            return False

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get configuration value by key.

        Supports dot notation for nested access (e.g., 'lafc.base_channels').
        """
        if '.' in key:
            section, option = key.split('.', 1)
            return self._data.get(section, {}).get(option, default)
        for section_data in self._data.values():
            if key in section_data:
                return section_data[key]
        return default

    def set(self, key: str, value: Any) -> bool:
        """
        Set configuration value by key (``section.key``; bare keys go to ``run``).
        """
        section, option = key.split('.', 1) if '.' in key else ('run', key)
        self._data.setdefault(section, {})[option] = value
        return True

    def section(self, name: str) -> Dict[str, Any]:
        return dict(self._data.get(name, {}))

    def get_all(self) -> Sections:
        return {name: dict(values) for name, values in self._data.items()}

    def validate(self, config_data: Optional[Sections] = None) -> Dict[str, Any]:
        """
        Validate a run configuration.

        Returns:
            Dictionary with validation results:
            {
                "status": str,  # "valid" or "invalid"
                "warnings": List[str],
                "errors": List[str]
            }
        """
        if config_data is None:
            config_data = self._data

        warnings: List[str] = []
        errors: List[str] = []

        if not config_data:
            warnings.append("Configuration is empty")

        lafc = config_data.get('lafc', {})
        radius = lafc.get('local_radius', 1)
        if not isinstance(radius, int) or isinstance(radius, bool) or radius < 0:
            errors.append(f"lafc.local_radius must be a non-negative integer (sequence length 2n+1), got {radius!r}")

        schedule = config_data.get('schedule', {})
        for prefix in ('lafc', 'fgt'):
            iterations = schedule.get(f'{prefix}_iterations')
            milestone = schedule.get(f'{prefix}_milestone')
            if iterations is not None and (not isinstance(iterations, int) or iterations <= 0):
                errors.append(f"schedule.{prefix}_iterations must be positive, got {iterations!r}")
            elif iterations is not None and milestone is not None and milestone >= iterations:
                errors.append(f"schedule.{prefix}_milestone ({milestone}) must be below {prefix}_iterations ({iterations})")
        lr = schedule.get('lr')
        if lr is not None and (not isinstance(lr, (int, float)) or lr <= 0):
            errors.append(f"schedule.lr must be positive, got {lr!r}")

        data = config_data.get('data', {})
        for extent in ('height', 'width'):
            value = data.get(extent)
            if value is not None and (not isinstance(value, int) or value <= 0 or value % 4):
                errors.append(f"data.{extent} must be a positive multiple of 4, got {value!r}")
        kinds = data.get('mask_kinds')
        if kinds is not None:
            kinds = kinds if isinstance(kinds, tuple) else (kinds,)
            unknown = [k for k in kinds if k not in KNOWN_MASK_KINDS]
            if unknown:
                errors.append(f"data.mask_kinds has unknown kinds {unknown}; known: {list(KNOWN_MASK_KINDS)}")

        hinge = config_data.get('loss', {}).get('hinge_mode')
        if hinge is not None and hinge not in HINGE_MODES:
            errors.append(f"loss.hinge_mode must be one of {list(HINGE_MODES)}, got {hinge!r}")

        if 'run' in config_data and 'seed' not in config_data['run']:
            warnings.append("run.seed not set, default seed 0 will be used")

        return {
            "status": "valid" if len(errors) == 0 else "invalid",
            "warnings": warnings,
            "errors": errors
        }
