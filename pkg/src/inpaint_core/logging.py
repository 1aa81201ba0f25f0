"""
Logger Interface for inpaint_core
Protocol for structured logging operations with dependency injection
"""
import logging
import sys
from pathlib import Path
from typing import Protocol, runtime_checkable, Optional, Any, Union

DEFAULT_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


@runtime_checkable
class Logger(Protocol):
    """Protocol for logging operations"""

    def debug(self, message: str, *args: Any, **kwargs: Any) -> None:
        """Log a debug message"""
        ...

    def info(self, message: str, *args: Any, **kwargs: Any) -> None:
        """Log an info message"""
        ...

    def warning(self, message: str, *args: Any, **kwargs: Any) -> None:
        """Log a warning message"""
        ...

    def error(self, message: str, *args: Any, **kwargs: Any) -> None:
        """Log an error message"""
        ...

    def critical(self, message: str, *args: Any, **kwargs: Any) -> None:
        """Log a critical message"""
        ...


@runtime_checkable
class LoggerFactory(Protocol):
    """Protocol for creating logger instances with configuration"""

    def create_logger(self, name: str, config: Optional[dict] = None) -> Logger:
        """Create a configured logger instance"""
        ...


def _coerce_level(level: Union[int, str]) -> int:
    if isinstance(level, str):
        return getattr(logging, level.upper(), logging.INFO)
    return int(level)


class StandardLogger(Logger):
    """
    Logger protocol implementation backed by the standard ``logging`` module.

    A stdout handler is attached once per underlying logger; run directories
    additionally get a file handler (``run.log``) so every command leaves a
    log next to its artifacts.

    Example usage:
        logger = StandardLogger("inpaint_core.training", log_file="runs/a/run.log")
        logger.info("[TRAIN] iteration 10 L_F=0.42")
    """

    def __init__(self, name: str, level: Union[int, str] = logging.INFO,
                 log_file: Optional[Union[str, Path]] = None, fmt: Optional[str] = None):
        """
        Args:
            name: Logger name (typically the module or command name)
            level: Logging level, int or name (default: INFO)
            log_file: Optional path of an additional file handler
            fmt: Optional format string for newly attached handlers
        """
        self.name = name
        self.level = _coerce_level(level)
        self.log_file = Path(log_file) if log_file else None
        self._logger = logging.getLogger(name)
        self._logger.setLevel(self.level)
        formatter = logging.Formatter(fmt or DEFAULT_FORMAT)

        if not self._logger.handlers:
            handler = logging.StreamHandler(sys.stdout)
            handler.setFormatter(formatter)
            self._logger.addHandler(handler)

        if self.log_file is not None and not self._has_file_handler(self.log_file):
            self.log_file.parent.mkdir(parents=True, exist_ok=True)
            file_handler = logging.FileHandler(self.log_file, encoding="utf-8")
            file_handler.setFormatter(formatter)
            self._logger.addHandler(file_handler)

    def _has_file_handler(self, path: Path) -> bool:
        target = str(path.resolve())
        return any(isinstance(h, logging.FileHandler) and h.baseFilename == target
                   for h in self._logger.handlers)

    def close(self) -> None:
        """Detach and close file handlers (stream handlers stay)."""
        for handler in list(self._logger.handlers):
            if isinstance(handler, logging.FileHandler):
                handler.close()
                self._logger.removeHandler(handler)

    def debug(self, message: str, *args: Any, **kwargs: Any) -> None:
        self._logger.debug(message, *args, **kwargs)

    def info(self, message: str, *args: Any, **kwargs: Any) -> None:
        self._logger.info(message, *args, **kwargs)

    def warning(self, message: str, *args: Any, **kwargs: Any) -> None:
        self._logger.warning(message, *args, **kwargs)

    def error(self, message: str, *args: Any, **kwargs: Any) -> None:
        self._logger.error(message, *args, **kwargs)

    def critical(self, message: str, *args: Any, **kwargs: Any) -> None:
        self._logger.critical(message, *args, **kwargs)


class StandardLoggerFactory(LoggerFactory):
    """
    Factory for StandardLogger instances configured from a ``[logging]`` section.

    Example usage:
        factory = StandardLoggerFactory()
        logger = factory.create_logger("inpaint_core", {"level": "DEBUG", "log_file": "out/run.log"})
    """

    def create_logger(self, name: str, config: Optional[dict] = None) -> Logger:
        """
        Args:
            name: Logger name
            config: Optional dictionary with keys ``level``, ``format`` and ``log_file``

        Returns:
            StandardLogger instance implementing Logger protocol
        """
        config = config or {}
        level = _coerce_level(config.get('level', logging.INFO))
        return StandardLogger(name, level, log_file=config.get('log_file') or None,
                              fmt=config.get('format') or None)
