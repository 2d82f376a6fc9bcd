"""Delimited-text writers and readers for report artifacts.

All writers are deterministic: fixed column orders, repr() float formatting,
LF newlines, no timestamps. Schemas are documented in docs/FORMATS.md; every
file starts with '#'-prefixed key=value header lines carrying its metadata.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .errors import ConfigError
from .profiler import HeatmapReport, SweepReport, heatmap_axes
from .search import EvaluatedArch, FrontierComparison, ParetoFront, SearchResult
from .spaces import Architecture, DesignSpace, serialize

EXPORT_VERSION = 1


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _tau_label(tau: float) -> str:
    text = f"{tau:g}".replace(".", "_")
    return f"p{text}"


def write_heatmap_csv(report: HeatmapReport, space: DesignSpace, path) -> None:
    buf = io.StringIO()
    buf.write(f"# format_version={EXPORT_VERSION}\n")
    buf.write(f"# space={report.space}\n")
    buf.write(f"# metric={report.metric}\n")
    buf.write(f"# direction={report.direction}\n")
    buf.write(f"# axes={report.axis_names[0]},{report.axis_names[1]}\n")
    buf.write(f"# n_per_placement={report.n_per_placement}\n")
    buf.write(f"# seed={report.seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["block_code", report.axis_names[0], report.axis_names[1],
                     "resolution", "mean", "stderr", "n"])
    for row in report.rows:
        axis1, axis2 = heatmap_axes(space, row.block_code)
        writer.writerow([
            row.block_code,
            _fmt(axis1),
            _fmt(axis2),
            "all" if row.resolution is None else row.resolution,
            _fmt(row.mean),
            _fmt(row.stderr),
            row.n_per_placement * row.n_placements,
        ])
    Path(path).write_text(buf.getvalue())


def write_sweep_csv(report: SweepReport, path, raw: bool = False) -> None:
    """One row per placement. Default columns are differences against the
    shared baseline; raw=True exports the conditioned statistics instead."""
    buf = io.StringIO()
    buf.write(f"# format_version={EXPORT_VERSION}\n")
    buf.write(f"# space={report.space}\n")
    buf.write(f"# metric={report.metric}\n")
    buf.write(f"# direction={report.direction}\n")
    buf.write(f"# statistics={'raw' if raw else 'relative'}\n")
    buf.write(f"# n_per_placement={report.n_per_placement}\n")
    buf.write(f"# baseline_n={report.baseline_n}\n")
    buf.write(f"# seed={report.seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    suffix = "" if raw else "_rel"
    header = ["unit", "layer", "block_code", f"mean{suffix}"]
    header += [f"{_tau_label(t)}{suffix}" for t in report.taus]
    header += ["baseline_mean"] + [f"baseline_{_tau_label(t)}" for t in report.taus]
    writer.writerow(header)
    for row in report.rows:
        if raw:
            stats = [row.cond_mean, *row.cond_tau]
        else:
            stats = [row.rel_mean, *row.rel_tau]
        writer.writerow([
            row.placement.unit,
            row.placement.layer,
            row.placement.block_code,
            *[_fmt(v) for v in stats],
            _fmt(report.baseline_mean),
            *[_fmt(v) for v in report.baseline_tau],
        ])
    Path(path).write_text(buf.getvalue())


def write_sweep_boundaries(report: SweepReport, path) -> None:
    """Sidecar of row indices where units and (unit, layer) groups begin."""
    doc = {
        "format_version": EXPORT_VERSION,
        "space": report.space,
        "metric": report.metric,
        "rows": len(report.rows),
        "unit_boundaries": report.unit_boundaries(),
        "layer_boundaries": report.layer_boundaries(),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_sweep_dat(report: SweepReport, path, raw: bool = False) -> None:
    """Space-delimited variant for plotting tools; same rows as the CSV."""
    lines = [f"# space={report.space} metric={report.metric}"]
    suffix = "" if raw else "_rel"
    cols = ["index", "unit", "layer", "block_code", f"mean{suffix}"]
    cols += [f"{_tau_label(t)}{suffix}" for t in report.taus]
    lines.append("# columns: " + " ".join(cols))
    for i, row in enumerate(report.rows):
        stats = [row.cond_mean, *row.cond_tau] if raw else [row.rel_mean, *row.rel_tau]
        lines.append(
            " ".join([str(i), str(row.placement.unit), str(row.placement.layer),
                      row.placement.block_code, *[_fmt(v) for v in stats]])
        )
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# search artifacts

def _arch_columns(arch: Architecture) -> list[str]:
    return [
        arch.space,
        str(arch.resolution),
        "|".join(str(d) for d in arch.depths),
        "|".join("+".join(codes) for codes in arch.blocks),
        "|".join(_fmt(r) for r in arch.channel_ratios),
    ]


def write_frontier_csv(front: ParetoFront, path) -> None:
    buf = io.StringIO()
    buf.write(f"# format_version={EXPORT_VERSION}\n")
    for i, (name, direction) in enumerate(front.objectives, start=1):
        buf.write(f"# objective.{i}={name}:{direction}\n")
    writer = csv.writer(buf, lineterminator="\n")
    metric_cols = [name for name, _ in front.objectives]
    writer.writerow(
        ["eval_id", "generation", "parent_id", "mutation",
         "space", "resolution", "depths", "blocks", "channel_ratios", *metric_cols]
    )
    for p in front.points:
        writer.writerow(
            [p.eval_id, p.generation, p.parent_id, p.mutation,
             *_arch_columns(p.arch), *[_fmt(m) for m in p.metrics]]
        )
    Path(path).write_text(buf.getvalue())


def read_frontier_csv(path) -> ParetoFront:
    """Rebuild a frontier (records + metrics) from its CSV export."""
    text = Path(path).read_text()
    objectives = []
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            item = line.lstrip("#").strip()
            if item.startswith("objective."):
                _, _, value = item.partition("=")
                name, _, direction = value.partition(":")
                objectives.append((name, direction))
        elif line.strip():
            body.append(line)
    if not objectives:
        raise ConfigError(f"{path}: no objective header lines; not a frontier export")
    reader = csv.reader(body)
    header = next(reader, None)
    expected = ["eval_id", "generation", "parent_id", "mutation",
                "space", "resolution", "depths", "blocks", "channel_ratios"]
    if header is None or header[: len(expected)] != expected:
        raise ConfigError(f"{path}: unexpected frontier columns {header!r}")
    points = []
    n_obj = len(objectives)
    for row in reader:
        if len(row) != len(expected) + n_obj:
            raise ConfigError(f"{path}: malformed frontier row {row!r}")
        depths = tuple(int(d) for d in row[6].split("|"))
        blocks = tuple(tuple(part.split("+")) for part in row[7].split("|"))
        ratios = tuple(float(r) for r in row[8].split("|")) if row[8] else ()
        arch = Architecture(
            space=row[4],
            resolution=int(row[5]),
            depths=depths,
            blocks=blocks,
            channel_ratios=ratios,
        )
        points.append(
            EvaluatedArch(
                arch=arch,
                metrics=tuple(float(v) for v in row[len(expected):]),
                eval_id=int(row[0]),
                generation=int(row[1]),
                parent_id=int(row[2]),
                mutation=row[3],
            )
        )
    return ParetoFront(objectives=tuple(objectives), points=points)


def frontier_records(front: ParetoFront) -> list[dict]:
    out = []
    for p in front.points:
        record = serialize(p.arch)
        record["metrics"] = {name: value for (name, _), value in zip(front.objectives, p.metrics)}
        record["eval_id"] = p.eval_id
        record["generation"] = p.generation
        out.append(record)
    return out


def write_frontier_json(front: ParetoFront, path) -> None:
    doc = {
        "format_version": EXPORT_VERSION,
        "objectives": [f"{name}:{direction}" for name, direction in front.objectives],
        "architectures": frontier_records(front),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def search_history_doc(result: SearchResult) -> dict:
    return {
        "format_version": EXPORT_VERSION,
        "space": result.space,
        "config": result.config,
        "total_evaluations": result.total_evaluations,
        "history": [
            {
                "generation": h.generation,
                "evaluations": h.evaluations,
                "best": list(h.best),
                "median": list(h.median),
            }
            for h in result.history
        ],
    }


def write_search_history(result: SearchResult, path) -> None:
    Path(path).write_text(json.dumps(search_history_doc(result), indent=2, sort_keys=True) + "\n")


def write_comparison_csv(cmp: FrontierComparison, path) -> None:
    buf = io.StringIO()
    buf.write(f"# format_version={EXPORT_VERSION}\n")
    buf.write(f"# budget_axis={cmp.budget_axis}\n")
    buf.write(f"# quality_axis={cmp.quality_axis}\n")
    buf.write(f"# frac_a={cmp.frac_a!r}\n")
    buf.write(f"# frac_b={cmp.frac_b!r}\n")
    buf.write(f"# frac_tie={cmp.frac_tie!r}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([cmp.budget_axis, "best_a", "best_b", "winner"])
    for t, a, b, w in zip(cmp.grid, cmp.best_a, cmp.best_b, cmp.winner):
        writer.writerow([_fmt(t), "" if a is None else _fmt(a), "" if b is None else _fmt(b), w])
    Path(path).write_text(buf.getvalue())
