"""Result writers: CSV, JSON and gnuplot data + script.

All writers are deterministic: floats are printed with ``.10g``, undefined
ratios as ``nan`` (``null`` in JSON), and nothing time-dependent is written.
"""

import csv
import json
import logging
import math
import re
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

from .errors import ConfigError

logger = logging.getLogger(__name__)

ROW_FIELDS = (
    "T",
    "policy",
    "c_f",
    "c_s",
    "c_f_norm",
    "c_s_norm",
    "reads",
    "writes",
    "stale_misses",
    "cold_misses",
)

MODEL_COLUMNS = ("model_c_f", "model_c_s", "model_c_f_norm", "model_c_s_norm")

SWEEP_FIELDS = ROW_FIELDS + MODEL_COLUMNS

BENCH_FIELDS = ("estimator", "keys", "events", "agreement", "bytes", "ns_per_record")

PER_KEY_FIELDS = (
    "T",
    "policy",
    "key",
    "reads",
    "writes",
    "hits",
    "stale_misses",
    "cold_misses",
    "updates",
    "invalidates",
    "polls",
    "c_f",
)

FORMATS = ("csv", "json", "gnuplot")

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]+")


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "nan" if math.isnan(value) else format(value, ".10g")
    return str(value)


def safe_name(text: str) -> str:
    """Filesystem-safe stem for a policy label or estimator descriptor."""
    return _UNSAFE.sub("_", text).strip("_") or "unnamed"


def prepare_out_dir(path: Path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        marker = path / ".freshlab-write-test"
        marker.write_text("", encoding="utf-8")
        marker.unlink()
    except OSError as e:
        raise ConfigError(f"output directory {path} is not writable: {e}") from e
    return path


def write_csv(path: Path, fields: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([format_value(row.get(name, "")) for name in fields])
    return path


def _json_value(value: Any) -> Any:
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def write_json(path: Path, fields: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    document = {
        "columns": list(fields),
        "rows": [{name: _json_value(row.get(name)) for name in fields} for row in rows],
    }
    Path(path).write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    return path


def write_gnuplot(
    out_dir: Path,
    stem: str,
    rows: Sequence[Mapping[str, Any]],
    y_columns: Sequence[str],
    group: str = "policy",
    x: str = "T",
) -> List[Path]:
    """One ``.dat`` block per ``group`` value and a ``.gp`` script plotting each y column.

    Blocks are separated by two blank lines so the script can address them
    with ``index``; x is plotted on a log axis.
    """
    groups: Dict[str, List[Mapping[str, Any]]] = {}
    for row in rows:
        groups.setdefault(str(row[group]), []).append(row)

    dat_path = Path(out_dir) / f"{stem}.dat"
    columns = [x, *y_columns]
    blocks = []
    for name, members in groups.items():
        lines = [f"# {group}={name}", "# " + " ".join(columns)]
        for row in members:
            lines.append(" ".join(format_value(row.get(c, math.nan)) for c in columns))
        blocks.append("\n".join(lines))
    dat_path.write_text("\n\n\n".join(blocks) + "\n", encoding="utf-8")

    script = [
        "set datafile missing 'nan'",
        "set logscale x",
        f"set xlabel '{x}'",
        "set key outside right",
        "set terminal pngcairo size 900,600",
    ]
    for column_index, column in enumerate(y_columns, start=2):
        script.append(f"set output '{stem}_{column}.png'")
        script.append(f"set ylabel '{column}'")
        plots = [
            f"'{dat_path.name}' index {i} using 1:{column_index} with linespoints title '{name}'"
            for i, name in enumerate(groups)
        ]
        script.append("plot " + ", \\\n     ".join(plots))
    gp_path = Path(out_dir) / f"{stem}.gp"
    gp_path.write_text("\n".join(script) + "\n", encoding="utf-8")
    return [dat_path, gp_path]


def write_gnuplot_bars(
    out_dir: Path,
    stem: str,
    rows: Sequence[Mapping[str, Any]],
    y_columns: Sequence[str],
    label: str = "estimator",
) -> List[Path]:
    """Bar-chart ``.dat``/``.gp`` pair, one bar group per row."""
    dat_path = Path(out_dir) / f"{stem}.dat"
    lines = ["# " + " ".join([label, *y_columns])]
    for row in rows:
        lines.append(" ".join([safe_name(str(row[label]))] + [format_value(row[c]) for c in y_columns]))
    dat_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    script = [
        "set style data histograms",
        "set style fill solid 0.8",
        "set terminal pngcairo size 900,600",
    ]
    for column_index, column in enumerate(y_columns, start=2):
        script.append(f"set output '{stem}_{column}.png'")
        script.append(f"set ylabel '{column}'")
        script.append(f"plot '{dat_path.name}' using {column_index}:xtic(1) title '{column}'")
    gp_path = Path(out_dir) / f"{stem}.gp"
    gp_path.write_text("\n".join(script) + "\n", encoding="utf-8")
    return [dat_path, gp_path]


def write_table(
    out_dir: Path,
    stem: str,
    fields: Sequence[str],
    rows: Sequence[Mapping[str, Any]],
    fmt: str = "csv",
    plot_columns: Optional[Sequence[str]] = None,
) -> List[Path]:
    """Write ``rows`` as ``<stem>.csv``, ``<stem>.json`` or gnuplot files.

    The gnuplot format also writes the CSV so the full table is always on disk.
    """
    if fmt not in FORMATS:
        raise ConfigError(f"unknown output format {fmt!r} (known: {', '.join(FORMATS)})")
    out_dir = Path(out_dir)
    if fmt == "json":
        files = [write_json(out_dir / f"{stem}.json", fields, rows)]
    else:
        files = [write_csv(out_dir / f"{stem}.csv", fields, rows)]
    if fmt == "gnuplot" and rows:
        columns = list(plot_columns or [f for f in fields if f.endswith("_norm")])
        if "T" in fields:
            files += write_gnuplot(out_dir, stem, rows, columns)
        else:
            files += write_gnuplot_bars(out_dir, stem, rows, columns)
    for path in files:
        logger.info("wrote %s", path)
    return files
