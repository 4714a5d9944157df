"""CSV artifact writing: atomic, reproducible, round-trip exact.

Files begin with ``# key=value`` metadata comment lines (config hash,
seed, artifact version, plus subcommand-specific entries), followed by
a header row and data rows.  Floats are serialized with 17 significant
digits so parsing them back reproduces the exact double.  Writes go to
a temporary file in the destination directory and are renamed into
place, so readers never observe a partial artifact.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class CsvArtifact:
    """One output table plus its provenance metadata."""

    path: Path
    header: tuple[str, ...]
    rows: list[tuple]
    metadata: dict[str, str] = field(default_factory=dict)


def format_value(value) -> str:
    """Serialize one cell; floats keep 17 significant digits."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def render_csv(artifact: CsvArtifact) -> str:
    buf = io.StringIO()
    for key, value in artifact.metadata.items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(artifact.header)
    for row in artifact.rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(artifact: CsvArtifact) -> Path:
    """Atomically write the artifact; returns the destination path."""
    dest = Path(artifact.path)
    dest.parent.mkdir(parents=True, exist_ok=True)
    content = render_csv(artifact)
    fd, tmp_name = tempfile.mkstemp(dir=dest.parent, prefix=dest.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(content)
        os.replace(tmp_name, dest)
    except OSError:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
    return dest


def read_csv(path):
    """Parse an artifact back into (metadata, header, rows of strings)."""
    metadata = {}
    data_lines = []
    with open(path, newline="") as handle:
        for line in handle:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition("=")
                metadata[key] = value
            else:
                data_lines.append(line)
    reader = csv.reader(data_lines)
    table = list(reader)
    if not table:
        return metadata, (), []
    return metadata, tuple(table[0]), table[1:]
