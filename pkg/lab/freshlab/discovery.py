"""Plugin discovery for policies, estimators and commands.

A plugin package is a directory of modules; every concrete subclass of the
package's base class with a ``name`` attribute is registered under that name.
Modules named ``_*`` or ``base_*`` are skipped.

CACHING:
Modules are only re-imported when their source file's mtime changes, so
repeated lookups cost a directory stat instead of an import pass.
"""

import importlib
import inspect
import logging
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, Generic, List, Optional, Tuple, Type, TypeVar

from .errors import ConfigError

logger = logging.getLogger(__name__)

T = TypeVar("T")


def parse_descriptor(descriptor: str) -> Tuple[str, Dict[str, str]]:
    """Split ``name:opt=value,opt=value`` into the name and an option dict."""
    text = descriptor.strip()
    name, _, rest = text.partition(":")
    name = name.strip()
    if not name:
        raise ConfigError(f"empty descriptor {descriptor!r}")
    options: Dict[str, str] = {}
    if rest.strip():
        for part in rest.split(","):
            key, sep, value = part.partition("=")
            if not sep or not key.strip():
                raise ConfigError(f"bad option {part!r} in descriptor {descriptor!r}")
            options[key.strip()] = value.strip()
    return name, options


def parse_bool(value: str) -> bool:
    lowered = str(value).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


class PluginDiscovery(Generic[T]):
    """Discovers plugin classes in a package with mtime-based caching.

    Plugin classes may declare ``options``: a mapping from descriptor option
    name to ``(constructor argument, converter)``, used by :meth:`create`.
    """

    def __init__(
        self,
        package: str,
        base_class: Type[T],
        error_class: Type[Exception] = ConfigError,
    ):
        module = importlib.import_module(package)
        self.package = package
        self.base_class = base_class
        self.error_class = error_class
        self.plugin_dir = Path(module.__file__).parent

        self._plugins: Dict[str, Type[T]] = {}
        # file_path -> (mtime, module_name)
        self._file_mtimes: Dict[Path, Tuple[float, str]] = {}

        self._cache_hits = 0
        self._cache_misses = 0
        self._last_scan_time: Optional[float] = None

    def discover(self, force_reload: bool = False) -> Dict[str, Type[T]]:
        """Scan the package and return name -> plugin class.

        Args:
            force_reload: re-import every module even if unchanged
        """
        scan_start = time.perf_counter()
        needs_reload = force_reload
        modified_files = set()
        current_files = set()

        for file_path in sorted(self.plugin_dir.glob("*.py")):
            if file_path.name.startswith("_") or file_path.name.startswith("base_"):
                continue
            current_files.add(file_path)
            try:
                current_mtime = file_path.stat().st_mtime
            except OSError:
                continue
            cached = self._file_mtimes.get(file_path)
            if cached is None or cached[0] != current_mtime:
                modified_files.add(file_path)
                needs_reload = True

        for deleted_file in set(self._file_mtimes) - current_files:
            _, module_name = self._file_mtimes.pop(deleted_file)
            self._remove_plugins_from_module(module_name)
            needs_reload = True

        if not needs_reload and self._plugins:
            self._cache_hits += 1
            return self._plugins

        self._cache_misses += 1
        files_to_process = current_files if force_reload else modified_files

        for file_path in sorted(files_to_process):
            module_name = f"{self.package}.{file_path.stem}"
            try:
                self._remove_plugins_from_module(module_name)
                if module_name in sys.modules and force_reload:
                    module = importlib.reload(sys.modules[module_name])
                else:
                    module = importlib.import_module(module_name)

                for _, obj in inspect.getmembers(module, inspect.isclass):
                    if (
                        obj is not self.base_class
                        and issubclass(obj, self.base_class)
                        and obj.__module__ == module_name
                        and not inspect.isabstract(obj)
                        and getattr(obj, "name", None)
                    ):
                        self._plugins[obj.name] = obj

                self._file_mtimes[file_path] = (file_path.stat().st_mtime, module_name)
            except Exception as e:
                logger.warning("skipping plugin module %s: %s", module_name, e)
                continue

        self._last_scan_time = time.perf_counter() - scan_start
        logger.debug(
            "discovered %d plugins in %s: %s",
            len(self._plugins),
            self.package,
            ", ".join(sorted(self._plugins)),
        )
        return self._plugins

    def _remove_plugins_from_module(self, module_name: str) -> None:
        stale = [name for name, cls in self._plugins.items() if cls.__module__ == module_name]
        for name in stale:
            del self._plugins[name]

    def get(self, name: str) -> Optional[Type[T]]:
        if not self._plugins:
            self.discover()
        return self._plugins.get(name)

    def names(self) -> List[str]:
        if not self._plugins:
            self.discover()
        return sorted(self._plugins)

    def reload(self) -> Dict[str, Type[T]]:
        return self.discover(force_reload=True)

    def create(self, descriptor: str, **defaults: Any) -> T:
        """Instantiate the plugin named by ``descriptor`` with its options.

        ``defaults`` the constructor accepts are passed along unless an
        option in the descriptor overrides the same argument.

        Raises:
            error_class: unknown name, unknown option, or a value the
                option converter rejects
        """
        name, options = parse_descriptor(descriptor)
        cls = self.get(name)
        if cls is None:
            raise self.error_class(
                f"unknown {self.package.rsplit('.', 1)[-1]} {name!r} "
                f"(available: {', '.join(self.names())})"
            )
        declared: Dict[str, Tuple[str, Callable[[str], Any]]] = getattr(cls, "options", {})
        accepted = inspect.signature(cls).parameters
        kwargs = {k: v for k, v in defaults.items() if k in accepted}
        for option, raw in options.items():
            if option not in declared:
                known = ", ".join(sorted(declared)) or "none"
                raise self.error_class(f"{name}: unknown option {option!r} (known: {known})")
            argument, convert = declared[option]
            try:
                kwargs[argument] = convert(raw)
            except ValueError as e:
                raise self.error_class(f"{name}: bad value for {option}: {e}") from None
        return cls(**kwargs)

    def get_cache_stats(self) -> Dict[str, Any]:
        total = self._cache_hits + self._cache_misses
        hit_rate = (self._cache_hits / total * 100) if total > 0 else 0
        return {
            "cache_hits": self._cache_hits,
            "cache_misses": self._cache_misses,
            "hit_rate_percent": round(hit_rate, 2),
            "last_scan_time_ms": round(self._last_scan_time * 1000, 2) if self._last_scan_time else None,
            "cached_plugins": len(self._plugins),
            "tracked_files": len(self._file_mtimes),
        }
