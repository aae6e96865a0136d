"""
Trade-off curves: one replay per sweep point, with TSV and SVG output.
"""

import math
import re
import xml.etree.ElementTree as ET
from collections.abc import Sequence
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure
from pydantic import BaseModel, ValidationError, model_validator

from ..calibrate.sweep import SweepPoint
from ..events.dataset import Dataset
from ..exceptions import CalibrationError, DatasetIOError
from ..logging import logger
from ..scoring import ScoredDataset, Scorer, score_dataset
from .metrics import MetricsReport, check_provenance, replay_scored

TSV_COLUMNS = ("grid_pct", "symbols_completed", "accept_rate", "cancel_rate", "realized_fnr", "feasible")
PLOTTED_METRICS = ("symbols_completed", "accept_rate", "cancel_rate")
SVG_NAMESPACES = {"": "http://www.w3.org/2000/svg", "xlink": "http://www.w3.org/1999/xlink"}

_PATH_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


class CurvePoint(BaseModel):
    grid_pct: float
    feasible: bool
    report: MetricsReport | None = None
    realized_fnr: float | None = None


class TradeoffCurve(BaseModel):
    target_fnr: float | None = None
    points: list[CurvePoint] = []

    @model_validator(mode="after")
    def _sorted(self) -> "TradeoffCurve":
        grid = [p.grid_pct for p in self.points]
        if grid != sorted(grid):
            raise ValueError("curve points must be sorted by grid percentage")
        return self

    def feasible_points(self) -> list[CurvePoint]:
        return [p for p in self.points if p.feasible]


def curve_scored(scored: ScoredDataset, sweep: Sequence[SweepPoint]) -> TradeoffCurve:
    """Replay every feasible sweep point; infeasible points are carried through flagged.

    Raises:
        CalibrationError: if no sweep point is feasible.
    """
    if not any(p.feasible for p in sweep):
        raise CalibrationError("every sweep point is infeasible; nothing to replay")
    points = []
    for p in sorted(sweep, key=lambda p: p.grid_pct):
        if p.feasible:
            report = replay_scored(scored, p.policy)
            points.append(CurvePoint(grid_pct=p.grid_pct, feasible=True, report=report, realized_fnr=p.realized_fnr))
        else:
            points.append(CurvePoint(grid_pct=p.grid_pct, feasible=False))
    return TradeoffCurve(target_fnr=sweep[0].target_fnr, points=points)


def curve(
    dataset: Dataset,
    sweep: Sequence[SweepPoint],
    trigger: Scorer | None = None,
    filter: Scorer | None = None,
) -> TradeoffCurve:
    check_provenance(dataset)
    return curve_scored(score_dataset(dataset, trigger, filter), sweep)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def sidecar_path(path: str | Path) -> Path:
    """Where ``export_curve`` keeps the full curve next to its TSV."""
    path = Path(path)
    return path.with_name(path.name + ".json")


def export_curve(curve: TradeoffCurve, path: str | Path) -> Path:
    """Write the curve as TSV with exactly the ``TSV_COLUMNS`` header.

    The complete curve (every report field and the target FNR) goes to a JSON
    sidecar, so ``load_curve`` can rebuild it exactly.
    """
    path = Path(path)
    lines = ["\t".join(TSV_COLUMNS)]
    for p in curve.points:
        r = p.report
        row = [
            p.grid_pct,
            r.symbols_completed if r else None,
            r.accept_rate if r else None,
            r.cancel_rate if r else None,
            p.realized_fnr,
            p.feasible,
        ]
        lines.append("\t".join(_cell(v) for v in row))
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        sidecar_path(path).write_text(curve.model_dump_json(indent=2), encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"cannot write curve {path}: {e}") from e
    return path


def _optional(text: str, cast):
    return None if text == "" else cast(text)


def _parse_tsv(path: Path) -> TradeoffCurve:
    try:
        rows = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DatasetIOError(f"cannot read curve {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise DatasetIOError(f"{path}: not UTF-8: {e}") from e
    # older files carried extra report columns after the six fixed ones
    if not rows or tuple(rows[0].split("\t")[: len(TSV_COLUMNS)]) != TSV_COLUMNS:
        raise DatasetIOError(f"{path}: missing curve header")
    header = rows[0].split("\t")
    target_fnr = None
    points = []
    for line_no, line in enumerate(rows[1:], start=2):
        if not line:
            continue
        cells = dict(zip(header, line.split("\t"), strict=False))
        try:
            feasible = cells["feasible"] == "true"
            target_fnr = _optional(cells.get("target_fnr", ""), float)
            report = None
            if feasible:
                report = MetricsReport(
                    symbols_completed=int(cells["symbols_completed"]),
                    shown=int(cells.get("shown") or 0),
                    accepted=int(cells.get("accepted") or 0),
                    explicit_cancels=int(cells.get("explicit_cancels") or 0),
                    generations=int(cells.get("generations") or 0),
                    accept_rate=_optional(cells["accept_rate"], float),
                    cancel_rate=_optional(cells["cancel_rate"], float),
                    generations_filtered_pct=float(cells.get("generations_filtered_pct") or 0.0),
                )
            points.append(
                CurvePoint(
                    grid_pct=float(cells["grid_pct"]),
                    feasible=feasible,
                    report=report,
                    realized_fnr=_optional(cells["realized_fnr"], float),
                )
            )
        except (KeyError, ValueError) as e:
            raise DatasetIOError(f"{path}:{line_no}: malformed curve row: {e}") from e
    return TradeoffCurve(target_fnr=target_fnr, points=points)


def load_curve(path: str | Path) -> TradeoffCurve:
    """Read a curve TSV, taking the full reports from its sidecar when the two agree.

    Without a sidecar, report fields outside the TSV columns read as zero.
    """
    path = Path(path)
    curve = _parse_tsv(path)
    sidecar = sidecar_path(path)
    if not sidecar.exists():
        return curve
    try:
        full = TradeoffCurve.model_validate_json(sidecar.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, ValidationError) as e:
        raise DatasetIOError(f"cannot read curve sidecar {sidecar}: {e}") from e
    if [(p.grid_pct, p.feasible) for p in full.points] != [(p.grid_pct, p.feasible) for p in curve.points]:
        logger.warning(f"Ignoring {sidecar}: its points do not match {path}")
        return curve
    return full


def _path_vertices(d: str) -> list[str]:
    """``x,y`` pairs of a path drawn with absolute moveto/lineto commands."""
    numbers = _PATH_NUMBER.findall(d)
    return [f"{x},{y}" for x, y in zip(numbers[0::2], numbers[1::2], strict=False)]


def _lines_to_polylines(path: Path) -> None:
    """Rewrite the path of each metric's line group as a ``<polyline>``."""
    for prefix, uri in SVG_NAMESPACES.items():
        ET.register_namespace(prefix, uri)
    svg = f"{{{SVG_NAMESPACES['']}}}"
    tree = ET.parse(path)
    groups = [g for g in tree.getroot().iter(f"{svg}g") if g.get("id") in PLOTTED_METRICS]
    for group in groups:
        children = list(group)
        index, line = next(
            ((i, c) for i, c in enumerate(children) if c.tag == f"{svg}path" and "id" not in c.attrib),
            (0, None),
        )
        if line is None:
            # every value was undefined, so matplotlib drew nothing
            polyline = ET.Element(f"{svg}polyline", {"points": "", "style": "fill: none"})
        else:
            attributes = {k: v for k, v in line.attrib.items() if k != "d"}
            points = " ".join(_path_vertices(line.get("d", "")))
            polyline = ET.Element(f"{svg}polyline", {"points": points, **attributes})
            group.remove(line)
        group.insert(index, polyline)
    tree.write(path, encoding="utf-8", xml_declaration=True)


def plot_curve(curve: TradeoffCurve, path: str | Path) -> Path:
    """Standalone SVG with one ``<polyline>`` per metric against the generation filter rate.

    Symbols completed is scaled by its maximum so all three share the unit axis.
    Each line's group carries its metric name as its SVG id.
    """
    path = Path(path)
    feasible = curve.feasible_points()
    x = np.array([p.grid_pct for p in feasible], dtype=np.float64)
    symbols = np.array([p.report.symbols_completed for p in feasible], dtype=np.float64)
    scale = symbols.max() if symbols.size and symbols.max() > 0 else 1.0
    series = {
        "symbols_completed": symbols / scale,
        "accept_rate": np.array([math.nan if p.report.accept_rate is None else p.report.accept_rate for p in feasible]),
        "cancel_rate": np.array([math.nan if p.report.cancel_rate is None else p.report.cancel_rate for p in feasible]),
    }
    labels = {
        "symbols_completed": "symbols completed (relative)",
        "accept_rate": "accept rate",
        "cancel_rate": "cancel rate",
    }

    with matplotlib.rc_context({"svg.fonttype": "none", "svg.hashsalt": "cgate"}):
        fig = Figure(figsize=(6.4, 4.0))
        ax = fig.subplots()
        for name in PLOTTED_METRICS:
            ax.plot(x, series[name], marker="o", gid=name, label=labels[name])
        ax.set_xlabel("% generations filtered by trigger")
        ax.set_ylim(0.0, 1.05)
        title = "trade-off" if curve.target_fnr is None else f"trade-off at FNR {curve.target_fnr:g}"
        ax.set_title(title)
        ax.legend(loc="best")
        metadata = {"Creator": None, "Date": None, "Format": None, "Type": None}
        try:
            fig.savefig(path, format="svg", metadata=metadata)
            _lines_to_polylines(path)
        except OSError as e:
            raise DatasetIOError(f"cannot write plot {path}: {e}") from e
    logger.info(f"Wrote curve plot to {path}")
    return path
