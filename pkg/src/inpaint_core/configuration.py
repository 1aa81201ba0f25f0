"""
Configuration Interface for inpaint_core
Protocol for loading, saving and validating sectioned run configurations
"""
from typing import Protocol, runtime_checkable, Dict, Any, Optional, Union
from pathlib import Path

# section name -> {key: coerced value}
Sections = Dict[str, Dict[str, Any]]


@runtime_checkable
class Configuration(Protocol):
    """Protocol for run-configuration stores (``[section]`` / ``key = value`` data)"""

    def load(self, source: Union[str, Path]) -> Sections:
        """Load sections from a file"""
        ...

    def save(self, config: Sections, destination: Union[str, Path]) -> bool:
        """Write sections to a file"""
        ...

    def get(self, key: str, default: Optional[Any] = None) -> Any:
        """Get a value by ``section.key`` (or bare key, first match)"""
        ...

    def set(self, key: str, value: Any) -> bool:
        """Set a value by ``section.key``"""
        ...

    def validate(self, config: Optional[Sections] = None) -> Dict[str, Any]:
        """Check values against the run-config contract"""
        ...
