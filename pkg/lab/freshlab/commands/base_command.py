"""Base command interface for the freshlab CLI."""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, ClassVar, Dict, List


@dataclass
class CommandResult:
    """Rows produced, files written, and the process exit code."""

    rows: List[Dict[str, Any]] = field(default_factory=list)
    files: List[Path] = field(default_factory=list)
    exit_code: int = 0
    summary: List[str] = field(default_factory=list)


class BaseCommand(ABC):
    """Base class for CLI commands.

    ``name`` is the subcommand; ``input_schema`` is the JSON Schema of the
    argument dict the config loader assembles for it.
    """

    name: ClassVar[str] = ""

    @property
    @abstractmethod
    def description(self) -> str:
        """One-line help text."""
        pass

    @property
    @abstractmethod
    def input_schema(self) -> Dict[str, Any]:
        """JSON schema for command input."""
        pass

    @abstractmethod
    async def execute(self, arguments: Dict[str, Any]) -> CommandResult:
        """Run the command with validated arguments."""
        pass
