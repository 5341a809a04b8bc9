"""CLI commands, located by plugin discovery."""

from ..discovery import PluginDiscovery
from ..errors import ConfigError
from .base_command import BaseCommand, CommandResult

command_discovery: PluginDiscovery[BaseCommand] = PluginDiscovery(__name__, BaseCommand, ConfigError)

__all__ = ["BaseCommand", "CommandResult", "command_discovery"]
