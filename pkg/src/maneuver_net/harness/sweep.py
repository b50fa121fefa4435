"""Grid sweeps over (model, horizon or TTE, ROI scale) rendered as result tables.

Two layouts: classification (rows = model x observation horizon, TTE 0) and
prediction (rows = model x TTE). Columns are ROI scales x1..x4; the best cell
of each model is marked with ``*``.
"""

from __future__ import annotations

import json
import logging
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from ..errors import ConfigError
from ..roi import ROI_SCALES
from .data import ClipData
from .metrics import EvalReport, fmt_pct
from .train import RunConfig, evaluate, train

log = logging.getLogger(__name__)

MODEL_LABELS = {
    "baseline": "Baseline",
    "disjoint": "Disjoint",
    "i3d": "I3D",
    "stm": "Spatiotemporal Multiplier",
    "slowfast": "SlowFast",
}


@dataclass
class SweepCell:
    config: RunConfig
    report: EvalReport | None = None
    error: str | None = None

    @property
    def accuracy(self) -> float | None:
        return self.report.accuracy if self.report else None

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "report": self.report.to_dict() if self.report else None,
            "error": self.error,
        }


@dataclass
class SweepResult:
    cells: list[SweepCell] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"cells": [c.to_dict() for c in self.cells]}

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def from_dict(cls, d: dict) -> "SweepResult":
        cells = []
        for c in d["cells"]:
            rep = EvalReport.from_dict(c["report"]) if c.get("report") else None
            cells.append(SweepCell(RunConfig.from_dict(c["config"]), rep, c.get("error")))
        return cls(cells)


# (train, val) data for a config's window spec
DataFn = Callable[[RunConfig], tuple[ClipData, ClipData]]


def run_sweep(grid: Sequence[RunConfig], data_fn: DataFn) -> SweepResult:
    """Train and evaluate every cell; a failing cell is recorded and skipped."""
    if not grid:
        raise ConfigError("sweep grid is empty")
    result = SweepResult()
    for cfg in grid:
        cell = SweepCell(cfg)
        try:
            tr, va = data_fn(cfg)
            trained = train(cfg, tr, va)
            cell.report = evaluate(trained.model, va, cfg)
        except Exception as exc:  # keep sweeping; the table shows the gap
            cell.error = f"{type(exc).__name__}: {exc}"
            log.warning("cell %s failed: %s", cfg.to_dict(), cell.error)
            log.debug("%s", traceback.format_exc())
        result.cells.append(cell)
    return result


def expand_grid(spec: dict) -> list[RunConfig]:
    """Cartesian product over list-valued keys of a grid document.

    ``models``, ``scales``, ``horizons`` and ``ttes`` are lists; everything
    under ``base`` is passed to every :class:`RunConfig`.
    """
    try:
        models = spec["models"]
    except KeyError:
        raise ConfigError("grid needs a 'models' list") from None
    scales = spec.get("scales", [3])
    horizons = spec.get("horizons", [20])
    ttes = spec.get("ttes", [0])
    base = dict(spec.get("base", {}))
    base.pop("window", None)
    grid = []
    for m in models:
        for n in horizons:
            for tte in ttes:
                for s in scales:
                    window = {"obs_horizon": n, "tte": tte, "roi_scale": s}
                    grid.append(RunConfig.from_dict({**base, "model": m, "window": window}))
    return grid


def render_table(result: SweepResult, row_key: str = "obs_horizon", title: str = "") -> str:
    """Rows (model, horizon or TTE); columns ROI x1..x4; ``*`` marks each model's best cell."""
    if row_key not in ("obs_horizon", "tte"):
        raise ConfigError("row_key must be 'obs_horizon' or 'tte'")
    head = "Obs. Horizon" if row_key == "obs_horizon" else "TTE"
    table: dict[str, dict[int, dict[int, SweepCell]]] = {}
    for c in result.cells:
        w = c.config.window
        table.setdefault(c.config.model, {}).setdefault(getattr(w, row_key), {})[w.roi_scale] = c
    lines = [title] if title else []
    lines.append(f"{'Model':<28}{head:>13}" + "".join(f"{'x' + str(s):>10}" for s in ROI_SCALES))
    for model, rows in table.items():
        accs = [c.accuracy for r in rows.values() for c in r.values() if c.accuracy is not None]
        best = max(accs) if accs else None
        for i, (key, row) in enumerate(sorted(rows.items())):
            label = MODEL_LABELS.get(model, model) if i == 0 else ""
            cells = []
            for s in ROI_SCALES:
                c = row.get(s)
                if c is None:
                    cells.append("")
                elif c.report is None:
                    cells.append("fail")
                else:
                    mark = "*" if best is not None and c.accuracy == best else ""
                    cells.append(fmt_pct(c.accuracy) + mark)
            lines.append(f"{label:<28}{key:>13}" + "".join(f"{x:>10}" for x in cells))
    return "\n".join(lines)
