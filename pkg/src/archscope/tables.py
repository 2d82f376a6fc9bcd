"""Metric tables: replayable measurement stand-ins.

Two kinds. An additive table maps every (unit, layer, block) placement to a
contribution, plus one constant per resolution; an architecture's value is
the sum over its present layers plus its resolution's constant. An exact
table maps canonical architecture-record hashes straight to values.

Additive tables must cover the whole declared space: gaps are rejected when
the table is bound to a space, not discovered mid-evaluation. Exact tables
raise on a missing architecture at evaluation time.

File format (see docs/FORMATS.md): '#'-prefixed key=value header lines, then
a CSV body with columns (unit, layer, block_code, value) or
(arch_record_hash, value).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .costs import MAXIMIZE, MINIMIZE, MetricEvaluator, params_digest
from .errors import ConfigError, CoverageError
from .spaces import (
    Architecture,
    DesignSpace,
    iter_placements,
    record_hash,
    serialize,
)

TABLE_VERSION = 1

ADDITIVE = "additive"
EXACT = "exact"


@dataclass(frozen=True)
class MetricTable:
    space: str
    metric: str
    direction: str
    units: str
    kind: str
    entries: Mapping = field(repr=False)
    resolution_constants: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (ADDITIVE, EXACT):
            raise ConfigError(f"table kind must be additive or exact, got {self.kind!r}")
        if self.direction not in (MINIMIZE, MAXIMIZE):
            raise ConfigError(f"table direction must be minimize or maximize, got {self.direction!r}")


def validate_coverage(space: DesignSpace, table: MetricTable) -> None:
    """Additive tables must have an entry for every placement and resolution."""
    if table.space != space.name:
        raise CoverageError(f"table covers space {table.space!r}, not {space.name!r}")
    if table.kind != ADDITIVE:
        return
    for p in iter_placements(space):
        if (p.unit, p.layer, p.block_code) not in table.entries:
            raise CoverageError(
                f"additive table {table.metric!r} missing entry for "
                f"unit {p.unit} layer {p.layer} block {p.block_code}"
            )
    for r in space.resolutions:
        if r not in table.resolution_constants:
            raise CoverageError(
                f"additive table {table.metric!r} missing resolution constant for {r}"
            )


def table_evaluate(space: DesignSpace, table: MetricTable, arch: Architecture) -> float:
    if table.kind == ADDITIVE:
        total = float(table.resolution_constants.get(arch.resolution, 0.0))
        for u, l, code in arch.iter_placements():
            key = (u, l, code)
            if key not in table.entries:
                raise CoverageError(
                    f"additive table {table.metric!r} missing entry for "
                    f"unit {u} layer {l} block {code}"
                )
            total += float(table.entries[key])
        return total
    digest = record_hash(serialize(arch))
    if digest not in table.entries:
        raise CoverageError(
            f"exact table {table.metric!r} has no value for architecture {digest[:12]}"
        )
    return float(table.entries[digest])


def table_evaluator(space: DesignSpace, table: MetricTable) -> MetricEvaluator:
    validate_coverage(space, table)
    res_sensitive = (
        table.kind == EXACT
        or len({round(v, 12) for v in table.resolution_constants.values()}) > 1
    )
    return MetricEvaluator(
        name=table.metric,
        direction=table.direction,
        fn=lambda arch: table_evaluate(space, table, arch),
        resolution_sensitive=res_sensitive,
        params_digest=params_digest(
            {"kind": f"table-{table.kind}", "metric": table.metric, "n": len(table.entries)}
        ),
    )


# ---------------------------------------------------------------------------
# file IO

def save_table(table: MetricTable, path) -> None:
    buf = io.StringIO()
    buf.write(f"# format_version={TABLE_VERSION}\n")
    buf.write(f"# space={table.space}\n")
    buf.write(f"# metric={table.metric}\n")
    buf.write(f"# direction={table.direction}\n")
    buf.write(f"# units={table.units}\n")
    buf.write(f"# kind={table.kind}\n")
    for r in sorted(table.resolution_constants):
        buf.write(f"# resolution_constant.{r}={table.resolution_constants[r]!r}\n")
    writer = csv.writer(buf, lineterminator="\n")
    if table.kind == ADDITIVE:
        writer.writerow(["unit", "layer", "block_code", "value"])
        for (u, l, code) in sorted(table.entries, key=lambda k: (k[0], k[1], str(k[2]))):
            writer.writerow([u, l, code, repr(float(table.entries[(u, l, code)]))])
    else:
        writer.writerow(["arch_record_hash", "value"])
        for digest in sorted(table.entries):
            writer.writerow([digest, repr(float(table.entries[digest]))])
    Path(path).write_text(buf.getvalue())


def load_table(path, space: DesignSpace | None = None) -> MetricTable:
    """Parse a table file; binds and coverage-checks against space when given."""
    text = Path(path).read_text()
    header: dict[str, str] = {}
    body_lines = []
    for line in text.splitlines():
        if line.startswith("#"):
            item = line.lstrip("#").strip()
            if "=" in item:
                key, _, value = item.partition("=")
                header[key.strip()] = value.strip()
        elif line.strip():
            body_lines.append(line)
    for key in ("space", "metric", "direction", "kind"):
        if key not in header:
            raise ConfigError(f"{path}: table header missing {key!r}")
    kind = header["kind"]
    constants = {}
    for key, value in header.items():
        if key.startswith("resolution_constant."):
            constants[int(key.split(".", 1)[1])] = float(value)
    reader = csv.reader(body_lines)
    columns = next(reader, None)
    entries: dict = {}
    if kind == ADDITIVE:
        if columns != ["unit", "layer", "block_code", "value"]:
            raise ConfigError(f"{path}: additive table needs columns unit,layer,block_code,value")
        for row in reader:
            if len(row) != 4:
                raise ConfigError(f"{path}: malformed row {row!r}")
            entries[(int(row[0]), int(row[1]), row[2])] = float(row[3])
    elif kind == EXACT:
        if columns != ["arch_record_hash", "value"]:
            raise ConfigError(f"{path}: exact table needs columns arch_record_hash,value")
        for row in reader:
            if len(row) != 2:
                raise ConfigError(f"{path}: malformed row {row!r}")
            entries[row[0]] = float(row[1])
    else:
        raise ConfigError(f"{path}: unknown table kind {kind!r}")
    table = MetricTable(
        space=header["space"],
        metric=header["metric"],
        direction=header["direction"],
        units=header.get("units", ""),
        kind=kind,
        entries=entries,
        resolution_constants=constants,
    )
    if space is not None:
        validate_coverage(space, table)
    return table


def exact_table_from_pairs(space: DesignSpace, metric: str, direction: str, units: str, pairs) -> MetricTable:
    """Build an exact table from (architecture, value) pairs."""
    entries = {record_hash(serialize(arch)): float(value) for arch, value in pairs}
    return MetricTable(
        space=space.name,
        metric=metric,
        direction=direction,
        units=units,
        kind=EXACT,
        entries=entries,
    )
