"""Exception roots shared by every freshlab module.

Modules define their own errors on top of these and the package re-exports
them. The CLI maps the roots onto exit codes:

- ConfigError (and ParameterError) -> 1, usage or configuration problem
- any other LabError               -> 2, runtime failure
"""


class LabError(Exception):
    """Base class for all freshlab errors."""
    pass


class ConfigError(LabError):
    """Invalid configuration, flags, or command usage."""
    pass


class ParameterError(ConfigError, ValueError):
    """A domain parameter is outside its valid range."""
    pass
