#!/usr/bin/env python3
"""
Test plugin discovery caching and descriptor handling.
"""

import importlib
import sys
import tempfile
import textwrap
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from freshlab.discovery import PluginDiscovery, parse_bool, parse_descriptor
from freshlab.errors import ConfigError
from freshlab.policies import policy_discovery
from freshlab.policies.base_policy import BasePolicy

PACKAGE = "freshlab_plugin_fixture"

ALPHA = textwrap.dedent(
    """
    from . import Widget


    class Alpha(Widget):
        name = "alpha"
        options = {"size": ("size", int)}

        def __init__(self, size=1, seed=0):
            self.size = size
            self.seed = seed
    """
)

BETA = textwrap.dedent(
    """
    from . import Widget


    class Beta(Widget):
        name = "beta"
    """
)


def _fixture_package(root: Path) -> Path:
    package = root / PACKAGE
    package.mkdir()
    (package / "__init__.py").write_text("class Widget:\n    name = ''\n", encoding="utf-8")
    (package / "alpha.py").write_text(ALPHA, encoding="utf-8")
    (package / "_private.py").write_text(BETA.replace("Beta", "Hidden").replace("beta", "hidden"), encoding="utf-8")
    return package


def test_cache_stats():
    print("=" * 60)
    print("TEST: Cache Statistics")
    print("=" * 60)

    discovery = PluginDiscovery("freshlab.policies", BasePolicy)
    stats = discovery.get_cache_stats()
    assert stats["cache_hits"] == 0 and stats["cache_misses"] == 0
    assert stats["hit_rate_percent"] == 0 and stats["last_scan_time_ms"] is None

    first = discovery.discover()
    second = discovery.discover()
    assert first is second, "unchanged files reuse the cached plugins"
    stats = discovery.get_cache_stats()
    assert stats["cache_misses"] == 1 and stats["cache_hits"] == 1, stats
    assert stats["hit_rate_percent"] == 50.0
    assert stats["cached_plugins"] == len(policy_discovery.names())

    print(f"✓ Stats: {discovery.get_cache_stats()}")


def test_file_changes():
    print("\n" + "=" * 60)
    print("TEST: Added and Removed Plugin Files")
    print("=" * 60)

    with tempfile.TemporaryDirectory() as tmp:
        package = _fixture_package(Path(tmp))
        sys.path.insert(0, tmp)
        try:
            widget = importlib.import_module(PACKAGE).Widget
            discovery = PluginDiscovery(PACKAGE, widget)
            assert sorted(discovery.discover()) == ["alpha"], "_private modules are skipped"

            (package / "beta.py").write_text(BETA, encoding="utf-8")
            importlib.invalidate_caches()
            assert sorted(discovery.discover()) == ["alpha", "beta"], "new file picked up"

            (package / "alpha.py").unlink()
            assert sorted(discovery.discover()) == ["beta"], "deleted file dropped"
            assert discovery.get_cache_stats()["tracked_files"] == 1

            misses = discovery.get_cache_stats()["cache_misses"]
            assert sorted(discovery.reload()) == ["beta"]
            assert discovery.get_cache_stats()["cache_misses"] == misses + 1, "forced reload is a miss"
        finally:
            sys.path.remove(tmp)
            for name in [m for m in sys.modules if m.startswith(PACKAGE)]:
                del sys.modules[name]

    print("✓ Cache follows the plugin directory")


def test_create_with_options():
    print("\n" + "=" * 60)
    print("TEST: Create From Descriptor")
    print("=" * 60)

    with tempfile.TemporaryDirectory() as tmp:
        _fixture_package(Path(tmp))
        sys.path.insert(0, tmp)
        try:
            widget = importlib.import_module(PACKAGE).Widget
            discovery = PluginDiscovery(PACKAGE, widget)

            alpha = discovery.create("alpha:size=3", seed=5, unrelated=1)
            assert (alpha.size, alpha.seed) == (3, 5), "options and accepted defaults applied"
            assert discovery.create("alpha", size=9).size == 9

            for bad, expected in (
                ("gamma", "unknown"),
                ("alpha:colour=red", "unknown option 'colour'"),
                ("alpha:size=big", "bad value for size"),
            ):
                try:
                    discovery.create(bad)
                except ConfigError as e:
                    assert expected in str(e), e
                else:
                    raise AssertionError(f"{bad!r} should fail")
        finally:
            sys.path.remove(tmp)
            for name in [m for m in sys.modules if m.startswith(PACKAGE)]:
                del sys.modules[name]

    print("✓ Options converted, bad descriptors rejected")


def test_parse_helpers():
    print("\n" + "=" * 60)
    print("TEST: Descriptor and Boolean Parsing")
    print("=" * 60)

    assert parse_descriptor(" topk : k=5, w=64 ") == ("topk", {"k": "5", "w": "64"})
    assert parse_descriptor("exact") == ("exact", {})
    for bad in ("", ":k=1", "cms:w", "cms:=4"):
        try:
            parse_descriptor(bad)
        except ConfigError:
            continue
        raise AssertionError(f"descriptor {bad!r} should be rejected")

    assert parse_bool("Yes") is True and parse_bool("0") is False
    try:
        parse_bool("perhaps")
    except ValueError:
        pass
    else:
        raise AssertionError("'perhaps' is not a boolean")

    print("✓ Descriptors and booleans parsed")


if __name__ == "__main__":
    test_cache_stats()
    test_file_changes()
    test_create_with_options()
    test_parse_helpers()
    print("\n✓ All discovery tests passed")
